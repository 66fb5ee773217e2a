use std::collections::BTreeMap;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use improvise::demonstrations::SegmentationParams;
use improvise::feasibility::boxes_overlap;
use improvise::geometry::{mean_pose, pose_distance, relative_pose, Pose, PoseDistanceParams};
use improvise::intention::{compute_weights, kernel_density, kernel_normalizer, IntentionConfig, RelationModel};
use improvise::model::LearnedModel;
use improvise::planner::{Planner, PlannerConfig};
use improvise::sampling::rng_from_seed;
use improvise::state::{ObjectId, WorldState};
use improvise::tasks::{lid_box_demos, lid_box_scene, random_start_state, MAX_START_ATTEMPTS};

fn pose() -> impl Strategy<Value = Pose<f64>> {
    (
        prop::array::uniform3(-1.0..1.0f64),
        prop::array::uniform4(-1.0..1.0f64).prop_filter("non-degenerate", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3),
    )
        .prop_map(|(t, q)| Pose::new(t, q).unwrap())
}

fn iso(p: &Pose<f64>) -> Isometry3<f64> {
    let [w, x, y, z] = p.rotation();
    let t = p.translation();
    Isometry3::from_parts(
        Translation3::new(t[0], t[1], t[2]),
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
    )
}

fn same_as_iso(p: &Pose<f64>, m: &Isometry3<f64>) -> bool {
    let a = iso(p);
    (a.translation.vector - m.translation.vector).norm() < 1e-9 && a.rotation.angle_to(&m.rotation) < 1e-7
}

fn relation(samples: Vec<Pose<f64>>, bandwidth: PoseDistanceParams<f64>) -> RelationModel<f64> {
    RelationModel {
        object: ObjectId::new("a"),
        reference: ObjectId::new("b"),
        samples,
        bandwidth,
        entropy: 0.0,
        weight: 1.0,
    }
}

proptest! {
    #[test]
    fn compose_matches_nalgebra(a in pose(), b in pose()) {
        prop_assert!(same_as_iso(&a.compose(&b), &(iso(&a) * iso(&b))));
        prop_assert!(same_as_iso(&a.inverse(), &iso(&a).inverse()));
    }

    #[test]
    fn transform_point_matches_nalgebra(a in pose(), p in prop::array::uniform3(-1.0..1.0f64)) {
        let ours = a.transform_point(&p);
        let theirs = iso(&a) * nalgebra::Point3::new(p[0], p[1], p[2]);
        prop_assert!((Vector3::from(ours) - theirs.coords).norm() < 1e-9);
    }

    #[test]
    fn relative_pose_recovers_the_offset(a in pose(), b in pose()) {
        prop_assert!(relative_pose(&a, &a.compose(&b)).approx_eq_rotation_invariant(&b, 1e-9));
    }

    #[test]
    fn pose_distance_is_a_symmetric_premetric(a in pose(), b in pose(), st in 0.005..0.1f64, sr in 0.05..0.5f64) {
        let bw = PoseDistanceParams::new(st, sr).unwrap();
        prop_assert!(pose_distance(&a, &a, &bw) < 1e-6);
        prop_assert!((pose_distance(&a, &b, &bw) - pose_distance(&b, &a, &bw)).abs() < 1e-9);
        prop_assert!(pose_distance(&a, &b, &bw) >= 0.0);
    }

    #[test]
    fn mean_of_copies_is_the_pose(a in pose(), n in 1usize..6) {
        let m = mean_pose(&vec![a; n]).unwrap();
        prop_assert!(m.approx_eq_rotation_invariant(&a, 1e-9));
    }

    #[test]
    fn pose_json_is_bit_exact(a in pose()) {
        let back: Pose<f64> = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn density_is_positive_and_bounded(samples in prop::collection::vec(pose(), 1..8), q in pose()) {
        let bw = PoseDistanceParams::default();
        let r = relation(samples, bw);
        let d = kernel_density(&r, &q);
        prop_assert!(d >= 0.0 && d <= 1.0 / kernel_normalizer(&bw) + 1e-12);
    }

    #[test]
    fn weights_normalize_and_reverse_entropy_order(h in prop::collection::vec(-12.0..12.0f64, 1..6)) {
        let entropies: BTreeMap<_, _> = h
            .iter()
            .enumerate()
            .map(|(i, v)| ((ObjectId::new(format!("o{i}")), ObjectId::new("ref")), *v))
            .collect();
        let w = compute_weights(&entropies).unwrap();
        let total: f64 = w.omega.values().sum();
        prop_assert!((w.eta * total - 1.0).abs() < 1e-12);
        for (k1, h1) in &entropies {
            for (k2, h2) in &entropies {
                if h1 < h2 {
                    prop_assert!(w.omega[k1] > w.omega[k2]);
                }
            }
        }
    }

    #[test]
    fn overlap_is_symmetric(a in pose(), b in pose(), ha in prop::array::uniform3(0.01..0.3f64), hb in prop::array::uniform3(0.01..0.3f64)) {
        prop_assert_eq!(boxes_overlap(&ha, &a, &hb, &b), boxes_overlap(&hb, &b, &ha, &a));
        let far = b.with_translation([b.translation()[0] + 5.0, 0.0, 0.0]);
        prop_assert!(!boxes_overlap(&ha, &a, &hb, &far));
    }

    #[test]
    fn state_json_is_bit_exact(a in pose(), b in pose()) {
        let s: WorldState<f64> = [(ObjectId::new("a"), a), (ObjectId::new("b"), b)].into_iter().collect();
        let back: WorldState<f64> = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tree_stays_consistent(seed in 0u64..1000, start_seed in 0u64..1000, iterations in 1usize..150) {
        let m = LearnedModel::from_raw_demos(&lid_box_demos::<f64>(5, 3), &SegmentationParams::default(), &IntentionConfig::default()).unwrap();
        let scene = lid_box_scene::<f64>();
        let s0 = random_start_state(&scene, &mut rng_from_seed(start_seed), MAX_START_ATTEMPTS).unwrap();
        let mut cfg = PlannerConfig::defaults_for(m.reference_likelihood().unwrap(), m.movable_objects(), m.bandwidth());
        cfg.seed = seed;
        let mut p = Planner::new(&m.intention, &m.actions, &scene, s0, cfg).unwrap();
        p.run(iterations).unwrap();
        prop_assert_eq!(p.tree().audit(cfg.action_cost), None);
        let best = p.recommend_best_plan().unwrap();
        prop_assert!(best.steps.len() <= cfg.max_depth);
    }
}

#[test]
fn single_precision_model_tracks_double_precision() {
    let seg32 = SegmentationParams::<f32>::default();
    let m32 = LearnedModel::<f32>::from_raw_demos(&lid_box_demos::<f32>(5, 4), &seg32, &IntentionConfig::default()).unwrap();
    let m64 = LearnedModel::<f64>::from_raw_demos(
        &lid_box_demos::<f64>(5, 4),
        &SegmentationParams::default(),
        &IntentionConfig::default(),
    )
    .unwrap();
    let scene = lid_box_scene::<f64>();
    let mut rng = rng_from_seed(8);
    for _ in 0..20 {
        let s = random_start_state(&scene, &mut rng, MAX_START_ATTEMPTS).unwrap();
        let s32: WorldState<f32> = s
            .iter()
            .map(|(id, p)| {
                let t = p.translation().map(|v| v as f32);
                let q = p.rotation().map(|v| v as f32);
                (id.clone(), Pose::new(t, q).unwrap())
            })
            .collect();
        let a = m64.intention.likelihood(&s).unwrap();
        let b = m32.intention.likelihood(&s32).unwrap() as f64;
        assert!((a - b).abs() <= 1e-2 * a.abs().max(1.0), "{a} vs {b}");
    }
}
