//! Per-object action models and goal-state sampling.
//!
//! An action moves one object. Each of its templates interprets the
//! demonstrated end poses relative to a different reference frame: another
//! object, or the moved object's own start pose.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::complete_linkage;
use crate::demonstrations::{extract_action_samples, TaskDemoSet};
use crate::error::ModelError;
use crate::geometry::{mean_pose, pose_distance, Pose, PoseDistanceParams};
use crate::sampling::{perturb, rng_from_seed};
use crate::scalar::Real;
use crate::state::{ObjectId, WorldState};

/// Reference frame of a template.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateFrame {
    /// Relative to another object's current pose.
    Object(ObjectId),
    /// Relative to the moved object's own pose before the action.
    Itself,
}

impl fmt::Display for TemplateFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateFrame::Object(id) => write!(f, "rel:{id}"),
            TemplateFrame::Itself => f.write_str("self"),
        }
    }
}

impl FromStr for TemplateFrame {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "self" => Ok(TemplateFrame::Itself),
            _ => s
                .strip_prefix("rel:")
                .filter(|id| !id.is_empty())
                .map(|id| TemplateFrame::Object(ObjectId::new(id)))
                .ok_or_else(|| ModelError::Invalid(format!("bad template id {s:?}"))),
        }
    }
}

impl Serialize for TemplateFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ActionTemplate<T: Real> {
    #[serde(rename = "id")]
    pub frame: TemplateFrame,
    pub samples: Vec<Pose<T>>,
}

impl<T: Real> ActionTemplate<T> {
    pub fn template_id(&self) -> String {
        self.frame.to_string()
    }

    /// Object whose pose anchors this template when acting on `moved`.
    pub fn reference_object<'a>(&'a self, moved: &'a ObjectId) -> &'a ObjectId {
        match &self.frame {
            TemplateFrame::Object(id) => id,
            TemplateFrame::Itself => moved,
        }
    }
}

/// Action that moves one object, or the no-op that stops the plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ActionModel<T: Real> {
    pub action_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<ObjectId>,
    pub templates: Vec<ActionTemplate<T>>,
    #[serde(default)]
    pub is_noop: bool,
}

pub const NOOP_ACTION_ID: &str = "noop";

impl<T: Real> ActionModel<T> {
    pub fn noop() -> Self {
        Self {
            action_id: NOOP_ACTION_ID.to_owned(),
            object_id: None,
            templates: Vec::new(),
            is_noop: true,
        }
    }

    pub fn move_object(object: ObjectId, templates: Vec<ActionTemplate<T>>) -> Self {
        Self {
            action_id: format!("move:{object}"),
            object_id: Some(object),
            templates,
            is_noop: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.is_noop {
            return Ok(());
        }
        if self.object_id.is_none() || self.templates.is_empty() {
            return Err(ModelError::Invalid(format!(
                "action {} needs an object and templates",
                self.action_id
            )));
        }
        for (i, t) in self.templates.iter().enumerate() {
            if t.samples.is_empty() {
                return Err(ModelError::Invalid(format!(
                    "template {} of {} has no samples",
                    t.frame, self.action_id
                )));
            }
            if self.templates[..i].iter().any(|o| o.frame == t.frame) {
                return Err(ModelError::Invalid(format!("duplicate template {} in {}", t.frame, self.action_id)));
            }
        }
        Ok(())
    }

    pub fn template(&self, frame: &TemplateFrame) -> Option<&ActionTemplate<T>> {
        self.templates.iter().find(|t| &t.frame == frame)
    }
}

/// One action model per manipulated object (one template per other object
/// plus the self template), followed by the no-op.
pub fn build_action_models<T: Real>(set: &TaskDemoSet<T>) -> Vec<ActionModel<T>> {
    let mut models: Vec<ActionModel<T>> = extract_action_samples(set)
        .into_iter()
        .map(|(object, per_template)| {
            let templates = per_template
                .into_iter()
                .map(|(frame, samples)| ActionTemplate { frame, samples })
                .collect();
            ActionModel::move_object(object, templates)
        })
        .collect();
    models.push(ActionModel::noop());
    models
}

/// Uniform template prior `1 / |templates|`.
pub fn template_prior<T: Real>(model: &ActionModel<T>) -> Result<T, ModelError> {
    if model.is_noop || model.templates.is_empty() {
        return Err(ModelError::NoopHasNoTemplates);
    }
    Ok(T::one() / T::from_usize(model.templates.len()).unwrap_or_else(T::one))
}

/// One clustered goal state for an action under one template.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalCandidate<T: Real> {
    pub state: WorldState<T>,
    pub probability: T,
    pub cluster_size: usize,
}

/// How goal states are drawn and discretized during expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalSampling<T: Real> {
    /// Relative poses drawn per template.
    pub samples: usize,
    /// Largest cluster diameter, in meters-equivalent of `metric`.
    pub cluster_cutoff: T,
    /// Kernel used both as perturbation noise and as the clustering metric.
    pub metric: PoseDistanceParams<T>,
    /// Perturb drawn poses with kernel noise; off draws the raw samples.
    pub noise: bool,
}

impl<T: Real> GoalSampling<T> {
    pub fn with_metric(metric: PoseDistanceParams<T>) -> Self {
        Self {
            samples: 20,
            cluster_cutoff: T::of(3.0) * metric.sigma_t,
            metric,
            noise: true,
        }
    }
}

/// Metric used to cluster goal poses: the normalized kernel distance scaled
/// back to meters by `sigma_t`.
pub fn cluster_distance<T: Real>(a: &Pose<T>, b: &Pose<T>, metric: &PoseDistanceParams<T>) -> T {
    metric.sigma_t * pose_distance(a, b, metric)
}

/// Draws goal poses for `model`'s object from `template`, maps them into the
/// world through the reference object's pose in `state`, and clusters them.
pub fn sample_goal_candidates<T: Real>(
    model: &ActionModel<T>,
    template: &ActionTemplate<T>,
    state: &WorldState<T>,
    sampling: &GoalSampling<T>,
    seed: u64,
) -> Result<Vec<GoalCandidate<T>>, ModelError> {
    if sampling.samples == 0 {
        return Err(ModelError::NoGoalSamples);
    }
    let moved = model.object_id.as_ref().ok_or(ModelError::NoopHasNoTemplates)?;
    if model.template(&template.frame) != Some(template) {
        return Err(ModelError::ForeignTemplate(template.template_id(), model.action_id.clone()));
    }
    if template.samples.is_empty() {
        return Err(ModelError::Invalid(format!("template {} has no samples", template.frame)));
    }
    if !state.contains(moved) {
        return Err(ModelError::MissingObject(moved.clone()));
    }
    let reference_id = template.reference_object(moved);
    let reference = *state
        .pose(reference_id)
        .ok_or_else(|| ModelError::MissingObject(reference_id.clone()))?;

    let mut rng = rng_from_seed(seed);
    let goals: Vec<Pose<T>> = (0..sampling.samples)
        .map(|_| {
            let rel = &template.samples[rng.random_range(0..template.samples.len())];
            let rel = if sampling.noise {
                perturb(rel, &sampling.metric, &mut rng)
            } else {
                *rel
            };
            reference.compose(&rel)
        })
        .collect();

    let clusters = complete_linkage(
        goals.len(),
        |i, j| cluster_distance(&goals[i], &goals[j], &sampling.metric),
        sampling.cluster_cutoff,
    );
    let total = T::from_usize(sampling.samples).unwrap_or_else(T::one);
    clusters
        .into_iter()
        .map(|members| {
            let poses: Vec<Pose<T>> = members.iter().map(|&i| goals[i]).collect();
            let mean = mean_pose(&poses)?;
            Ok(GoalCandidate {
                state: state.with_pose(moved, mean),
                probability: T::from_usize(members.len()).unwrap_or_else(T::one) / total,
                cluster_size: members.len(),
            })
        })
        .collect()
}
