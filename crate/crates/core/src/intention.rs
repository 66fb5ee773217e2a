//! Intention likelihood: how well a goal state matches the demonstrated goals.
//!
//! Each ordered object pair `(k, l)` gets a kernel density over the pose of
//! `k` relative to `l` at the end of the demonstrations. Relations that were
//! consistent across demonstrations (low entropy) get large weights, and the
//! likelihood of a state is the normalized weighted sum of pair densities.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demonstrations::ObjectPair;
use crate::error::ModelError;
use crate::geometry::{pose_distance_sq, relative_pose, Pose, PoseDistanceParams};
use crate::sampling::{derive_seed, perturb, rng_from_seed};
use crate::scalar::{log_sum_exp, Real};
use crate::state::{ObjectId, WorldState};

/// Kernel density over the pose of `object` relative to `reference`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RelationModel<T: Real> {
    pub object: ObjectId,
    pub reference: ObjectId,
    pub samples: Vec<Pose<T>>,
    pub bandwidth: PoseDistanceParams<T>,
    pub entropy: T,
    pub weight: T,
}

/// Normalizer of the product kernel: a 3-D isotropic Gaussian in translation
/// times a 1-D Gaussian in geodesic angle.
pub fn kernel_normalizer<T: Real>(params: &PoseDistanceParams<T>) -> T {
    let two_pi = T::TAU();
    two_pi.powf(T::of(1.5)) * params.sigma_t.powi(3) * two_pi.sqrt() * params.sigma_r
}

/// Average kernel value of `query` against the relation's samples.
pub fn kernel_density<T: Real>(model: &RelationModel<T>, query: &Pose<T>) -> T {
    let z = kernel_normalizer(&model.bandwidth);
    let n = T::from_usize(model.samples.len()).unwrap_or_else(T::one);
    let half = T::of(0.5);
    let sum: T = model
        .samples
        .iter()
        .map(|s| (-half * pose_distance_sq(s, query, &model.bandwidth)).exp())
        .sum();
    sum / (n * z)
}

/// Natural log of [`kernel_density`], stable far from all samples.
pub fn log_kernel_density<T: Real>(model: &RelationModel<T>, query: &Pose<T>) -> T {
    let z = kernel_normalizer(&model.bandwidth);
    let n = T::from_usize(model.samples.len()).unwrap_or_else(T::one);
    let half = T::of(0.5);
    let terms: Vec<T> = model
        .samples
        .iter()
        .map(|s| -half * pose_distance_sq(s, query, &model.bandwidth))
        .collect();
    log_sum_exp(&terms) - n.ln() - z.ln()
}

/// Monte Carlo entropy estimate with its standard error, both in nats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyEstimate<T: Real> {
    pub nats: T,
    pub std_error: T,
}

/// Plug-in entropy estimate `-(1/M) sum log p(x_m)` with `x_m` drawn from the
/// density itself: a uniformly chosen sample perturbed by kernel noise.
pub fn estimate_entropy<T: Real>(model: &RelationModel<T>, m: usize, seed: u64) -> Result<EntropyEstimate<T>, ModelError> {
    if m == 0 {
        return Err(ModelError::NoEntropySamples);
    }
    if model.samples.is_empty() {
        return Err(ModelError::EmptyRelation(model.object.clone(), model.reference.clone()));
    }
    let mut rng = rng_from_seed(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..m {
        let mode = &model.samples[rng.random_range(0..model.samples.len())];
        let x = perturb(mode, &model.bandwidth, &mut rng);
        let v = -log_kernel_density(model, &x).as_f64();
        sum += v;
        sum_sq += v * v;
    }
    let mf = m as f64;
    let mean = sum / mf;
    let var = if m > 1 {
        ((sum_sq - mf * mean * mean) / (mf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(EntropyEstimate {
        nats: T::of(mean),
        std_error: T::of((var / mf).sqrt()),
    })
}

/// Closed-form differential entropy of a single kernel (one sample), valid
/// while `sigma_r` is small against `pi`.
pub fn single_kernel_entropy<T: Real>(params: &PoseDistanceParams<T>) -> T {
    let c = T::one() + T::TAU().ln();
    T::of(1.5) * c + T::of(3.0) * params.sigma_t.ln() + T::of(0.5) * c + params.sigma_r.ln()
}

/// Relation weights derived from entropies.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T: Real> {
    pub omega: BTreeMap<ObjectPair, T>,
    pub eta: T,
    pub eps_h: T,
}

/// `eps_H = 0.01 - min(0, H_min)`, `omega = 1 / (eps_H + H)`, `eta = 1 / sum(omega)`.
pub fn compute_weights<T: Real>(entropies: &BTreeMap<ObjectPair, T>) -> Result<Weights<T>, ModelError> {
    let h_min = entropies.values().copied().reduce(T::min).ok_or(ModelError::NoRelations)?;
    let eps_h = T::of(0.01) - h_min.min(T::zero());
    let omega: BTreeMap<ObjectPair, T> = entropies.iter().map(|(pair, h)| (pair.clone(), T::one() / (eps_h + *h))).collect();
    let total: T = omega.values().copied().sum();
    if omega.values().any(|w| !(w.is_finite() && *w > T::zero())) || !(total > T::zero()) {
        return Err(ModelError::Invalid("relation weights must be finite and positive".into()));
    }
    Ok(Weights {
        omega,
        eta: T::one() / total,
        eps_h,
    })
}

/// Anything that scores a candidate final state.
pub trait GoalScorer<T: Real> {
    fn score(&self, state: &WorldState<T>) -> Result<T, ModelError>;
}

/// The learned intention likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct IntentionModel<T: Real> {
    pub relations: Vec<RelationModel<T>>,
    pub eta: T,
    pub eps_h: T,
}

/// Settings for learning an intention model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntentionConfig<T: Real> {
    pub bandwidth: PoseDistanceParams<T>,
    pub entropy_samples: usize,
    pub seed: u64,
}

impl<T: Real> Default for IntentionConfig<T> {
    fn default() -> Self {
        Self {
            bandwidth: PoseDistanceParams::default(),
            entropy_samples: 1000,
            seed: 0,
        }
    }
}

impl<T: Real> IntentionModel<T> {
    /// Fits one relation per ordered pair, estimates entropies with a derived
    /// seed per relation, and weights them.
    pub fn learn(relations: &BTreeMap<ObjectPair, Vec<Pose<T>>>, config: &IntentionConfig<T>) -> Result<Self, ModelError> {
        let mut models = Vec::with_capacity(relations.len());
        let mut entropies = BTreeMap::new();
        for (i, ((k, l), samples)) in relations.iter().enumerate() {
            if samples.is_empty() {
                return Err(ModelError::EmptyRelation(k.clone(), l.clone()));
            }
            let mut rel = RelationModel {
                object: k.clone(),
                reference: l.clone(),
                samples: samples.clone(),
                bandwidth: config.bandwidth,
                entropy: T::zero(),
                weight: T::one(),
            };
            rel.entropy = estimate_entropy(&rel, config.entropy_samples, derive_seed(config.seed, i as u64))?.nats;
            entropies.insert((k.clone(), l.clone()), rel.entropy);
            models.push(rel);
        }
        let w = compute_weights(&entropies)?;
        for rel in &mut models {
            rel.weight = w.omega[&(rel.object.clone(), rel.reference.clone())];
        }
        Ok(Self {
            relations: models,
            eta: w.eta,
            eps_h: w.eps_h,
        })
    }

    /// Assembles a model from relations whose weights are already set.
    pub fn from_relations(relations: Vec<RelationModel<T>>, eps_h: T) -> Result<Self, ModelError> {
        if relations.is_empty() {
            return Err(ModelError::NoRelations);
        }
        let total: T = relations.iter().map(|r| r.weight).sum();
        Ok(Self {
            relations,
            eta: T::one() / total,
            eps_h,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.relations.is_empty() {
            return Err(ModelError::NoRelations);
        }
        for r in &self.relations {
            if r.samples.is_empty() {
                return Err(ModelError::EmptyRelation(r.object.clone(), r.reference.clone()));
            }
            if !(r.weight.is_finite() && r.weight > T::zero()) {
                return Err(ModelError::Invalid(format!(
                    "relation ({}, {}) has a non-positive weight",
                    r.object, r.reference
                )));
            }
            PoseDistanceParams::new(r.bandwidth.sigma_t, r.bandwidth.sigma_r)?;
        }
        let total: T = self.relations.iter().map(|r| r.weight).sum();
        if ((self.eta * total) - T::one()).abs() > T::of(1e-9) || !(self.eps_h > T::zero()) {
            return Err(ModelError::Invalid(
                "eta must normalize the weights and eps_H must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn object_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self
            .relations
            .iter()
            .flat_map(|r| [r.object.clone(), r.reference.clone()])
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn relation(&self, object: &ObjectId, reference: &ObjectId) -> Option<&RelationModel<T>> {
        self.relations.iter().find(|r| &r.object == object && &r.reference == reference)
    }

    /// `eta * sum(omega_kl * p(T_l^-1 T_k))` over all modeled pairs.
    pub fn likelihood(&self, state: &WorldState<T>) -> Result<T, ModelError> {
        let mut acc = T::zero();
        for r in &self.relations {
            let k = state.pose(&r.object).ok_or_else(|| ModelError::MissingObject(r.object.clone()))?;
            let l = state
                .pose(&r.reference)
                .ok_or_else(|| ModelError::MissingObject(r.reference.clone()))?;
            acc = acc + r.weight * kernel_density(r, &relative_pose(l, k));
        }
        Ok(self.eta * acc)
    }
}

impl<T: Real> GoalScorer<T> for IntentionModel<T> {
    fn score(&self, state: &WorldState<T>) -> Result<T, ModelError> {
        self.likelihood(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ObjectId {
        ObjectId::new(s)
    }

    fn relation(samples: Vec<Pose<f64>>, st: f64, sr: f64) -> RelationModel<f64> {
        RelationModel {
            object: id("k"),
            reference: id("l"),
            samples,
            bandwidth: PoseDistanceParams::new(st, sr).unwrap(),
            entropy: 0.0,
            weight: 1.0,
        }
    }

    #[test]
    fn density_at_sample_is_inverse_normalizer() {
        let p = Pose::from_yaw([0.1, 0.2, 0.0], 0.3);
        let r = relation(vec![p], 0.02, 0.1);
        let z = kernel_normalizer(&r.bandwidth);
        assert!((kernel_density(&r, &p) - 1.0 / z).abs() <= 1e-12 / z);
    }

    #[test]
    fn density_tail_is_negligible() {
        let r = relation(vec![Pose::identity()], 0.02, 0.1);
        let z = kernel_normalizer(&r.bandwidth);
        let far = Pose::from_translation(0.2, 0.0, 0.0);
        assert!(kernel_density(&r, &far) < 1e-20 / z);
    }

    #[test]
    fn density_two_samples_hand_evaluated() {
        let r = relation(vec![Pose::identity(), Pose::from_translation(0.04, 0.0, 0.0)], 0.02, 0.1);
        let z = kernel_normalizer(&r.bandwidth);
        let expected = (1.0 + (-2.0f64).exp()) / 2.0 / z;
        assert!((kernel_density(&r, &Pose::identity()) - expected).abs() < 1e-12 * expected);
        let log = log_kernel_density(&r, &Pose::identity());
        assert!((log - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_deterministic() {
        let r = relation(vec![Pose::identity(), Pose::from_translation(0.1, 0.0, 0.0)], 0.02, 0.1);
        let a = estimate_entropy(&r, 500, 42).unwrap();
        let b = estimate_entropy(&r, 500, 42).unwrap();
        assert_eq!(a, b);
        assert!(estimate_entropy(&r, 0, 1).is_err());
    }

    #[test]
    fn single_mode_entropy_matches_closed_form() {
        let r = relation(vec![Pose::from_yaw([0.3, 0.0, 0.1], 1.0)], 0.02, 0.1);
        let est = estimate_entropy(&r, 10_000, 7).unwrap();
        let exact = single_kernel_entropy(&r.bandwidth);
        assert!(
            (est.nats - exact).abs() <= 3.0 * est.std_error,
            "{} vs {exact} (se {})",
            est.nats,
            est.std_error
        );
    }

    #[test]
    fn doubling_translation_bandwidth_adds_three_log_two() {
        let a = relation(vec![Pose::identity()], 0.02, 0.1);
        let b = relation(vec![Pose::identity()], 0.04, 0.1);
        let ea = estimate_entropy(&a, 10_000, 3).unwrap();
        let eb = estimate_entropy(&b, 10_000, 3).unwrap();
        // Same seed: identical standardized draws, so the difference is exact
        // up to rounding.
        assert!((eb.nats - ea.nats - 3.0 * 2f64.ln()).abs() < 1e-9);
    }

    fn pairs(hs: &[f64]) -> BTreeMap<ObjectPair, f64> {
        hs.iter().enumerate().map(|(i, h)| ((id(&format!("k{i}")), id("l")), *h)).collect()
    }

    #[test]
    fn weights_examples() {
        let w = compute_weights(&pairs(&[0.0])).unwrap();
        assert!((w.eps_h - 0.01).abs() < 1e-15);
        assert!((w.omega.values().next().unwrap() - 100.0).abs() < 1e-9);
        assert!((w.eta - 0.01).abs() < 1e-15);

        let w = compute_weights(&pairs(&[-1.0, 2.0])).unwrap();
        assert!((w.eps_h - 1.01).abs() < 1e-12);
        let om: Vec<f64> = w.omega.values().copied().collect();
        assert!((om[0] - 100.0).abs() < 1e-9);
        assert!((om[1] - 1.0 / 3.01).abs() < 1e-12);

        let w = compute_weights(&pairs(&[1.5, 1.5, 1.5])).unwrap();
        for om in w.omega.values() {
            assert!((w.eta * om - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(compute_weights::<f64>(&BTreeMap::new()).is_err());
    }

    fn two_object_model() -> IntentionModel<f64> {
        let mut rels = BTreeMap::new();
        rels.insert((id("a"), id("b")), vec![Pose::from_translation(0.0, 0.25, 0.0)]);
        rels.insert((id("b"), id("a")), vec![Pose::from_translation(0.0, -0.25, 0.0)]);
        IntentionModel::learn(&rels, &IntentionConfig::default()).unwrap()
    }

    #[test]
    fn likelihood_is_convex_combination() {
        let m = two_object_model();
        assert!((m.eta * m.relations.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        let s: WorldState<f64> = [(id("a"), Pose::from_translation(0.01, 0.25, 0.0)), (id("b"), Pose::identity())]
            .into_iter()
            .collect();
        let d: Vec<f64> = m
            .relations
            .iter()
            .map(|r| {
                let k = s.pose(&r.object).unwrap();
                let l = s.pose(&r.reference).unwrap();
                kernel_density(r, &relative_pose(l, k))
            })
            .collect();
        // Symmetric pair: equal entropies, hence equal weights.
        assert!((m.likelihood(&s).unwrap() - (d[0] + d[1]) / 2.0).abs() < 1e-9 * d[0]);
    }

    #[test]
    fn demo_state_beats_displaced_state() {
        let m = two_object_model();
        let demo: WorldState<f64> = [(id("a"), Pose::from_translation(0.0, 0.25, 0.0)), (id("b"), Pose::identity())]
            .into_iter()
            .collect();
        let moved = demo.with_pose(&id("a"), Pose::from_translation(0.2, 0.25, 0.0));
        assert!(m.likelihood(&demo).unwrap() > m.likelihood(&moved).unwrap());
    }

    #[test]
    fn single_pair_likelihood_is_its_density() {
        let mut rels = BTreeMap::new();
        rels.insert((id("a"), id("b")), vec![Pose::from_translation(0.0, 0.25, 0.0)]);
        let m = IntentionModel::learn(&rels, &IntentionConfig::default()).unwrap();
        let s: WorldState<f64> = [(id("a"), Pose::from_translation(0.0, 0.26, 0.0)), (id("b"), Pose::identity())]
            .into_iter()
            .collect();
        let d = kernel_density(&m.relations[0], &Pose::from_translation(0.0, 0.26, 0.0));
        assert!((m.likelihood(&s).unwrap() - d).abs() < 1e-12 * d);
        let missing: WorldState<f64> = [(id("a"), Pose::identity())].into_iter().collect();
        assert_eq!(m.likelihood(&missing), Err(ModelError::MissingObject(id("b"))));
    }
}
