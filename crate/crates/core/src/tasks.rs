//! Synthetic desk-scale tasks: a scene, a teacher that produces frame
//! traces, and a sampler for random feasible start states.

use rand::Rng;

use crate::demonstrations::{DemoObject, Frame, ObjectShape, RawDemo};
use crate::feasibility::{state_feasible, SceneObject, SceneSpec};
use crate::geometry::Pose;
use crate::sampling::rng_from_seed;
use crate::scalar::Real;
use crate::state::{ObjectId, WorldState};

const FRAME_DT: f64 = 0.1;
const MOVE_FRAMES: usize = 12;
const PAUSE_FRAMES: usize = 4;
const ARC_HEIGHT: f64 = 0.08;
const HAND_OFFSET: f64 = 0.04;

/// Rejection-sampling budget per start state.
pub const MAX_START_ATTEMPTS: usize = 10_000;

fn id(s: &str) -> ObjectId {
    ObjectId::new(s)
}

fn object<T: Real>(name: &str, half: [f64; 3]) -> SceneObject<T> {
    SceneObject {
        id: id(name),
        half_extents: half.map(T::of),
        pose: None,
    }
}

fn fixture<T: Real>(name: &str, half: [f64; 3], at: [f64; 3]) -> SceneObject<T> {
    SceneObject {
        id: id(name),
        half_extents: half.map(T::of),
        pose: Some(Pose::from_translation(T::of(at[0]), T::of(at[1]), T::of(at[2]))),
    }
}

fn table<T: Real>(objects: Vec<SceneObject<T>>) -> SceneSpec<T> {
    SceneSpec {
        workspace: [[-0.6, -0.4, 0.0], [0.6, 0.4, 0.5]].map(|r| r.map(T::of)),
        support_height: T::zero(),
        reach_radius: T::of(0.9),
        lift_height: T::of(0.15),
        objects,
    }
}

/// Pose of a box resting on the support surface.
pub fn on_table<T: Real>(scene: &SceneSpec<T>, half_z: T, x: T, y: T, yaw: T) -> Pose<T> {
    Pose::from_yaw([x, y, scene.support_height + half_z], yaw)
}

pub const LID_BOX_BOX: [f64; 3] = [0.08, 0.08, 0.05];
pub const LID_BOX_LID: [f64; 3] = [0.09, 0.09, 0.01];
/// Where the teacher leaves the lid in the box frame.
pub const LID_OFFSET: [f64; 3] = [0.0, 0.25, -0.04];
/// How the teacher shifts the box before placing the lid, in its own frame.
pub const BOX_SHIFT: [f64; 3] = [0.12, 0.04, 0.0];

/// Two free boxes on a 1.2 m by 0.8 m table.
pub fn lid_box_scene<T: Real>() -> SceneSpec<T> {
    table(vec![object("box", LID_BOX_BOX), object("lid", LID_BOX_LID)])
}

/// A teacher who slides the box a little, then sets the lid down beside it.
/// Final lid offsets carry 5 mm and 0.03 rad of noise.
pub fn lid_box_demos<T: Real>(n: usize, seed: u64) -> Vec<RawDemo<T>> {
    let scene = lid_box_scene::<f64>();
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let box0 = on_table(
                &scene,
                LID_BOX_BOX[2],
                rng.random_range(-0.35..-0.2),
                rng.random_range(-0.2..-0.05),
                rng.random_range(-0.3..0.3),
            );
            let lid0 = on_table(
                &scene,
                LID_BOX_LID[2],
                rng.random_range(0.2..0.35),
                rng.random_range(0.0..0.15),
                rng.random_range(-0.5..0.5),
            );
            let shift = Pose::from_yaw(BOX_SHIFT, rng.random_range(-0.05..0.05));
            let box1 = box0.compose(&shift);
            let lid1 = box1.compose(&noisy_offset(&mut rng, LID_OFFSET, 0.005, 0.03));
            let start: WorldState<f64> = [(id("box"), box0), (id("lid"), lid0)].into_iter().collect();
            teach(&scene, &start, &[(id("box"), box1), (id("lid"), lid1)])
        })
        .collect()
}

pub const TIDY_BOX: [f64; 3] = [0.1, 0.1, 0.05];
pub const TIDY_CUBE: [f64; 3] = [0.03, 0.03, 0.03];
pub const TIDY_LID: [f64; 3] = [0.09, 0.09, 0.01];
pub const CUBE_OFFSET: [f64; 3] = [0.2, 0.0, -0.02];
pub const TIDY_LID_OFFSET: [f64; 3] = [-0.25, 0.0, -0.04];

/// A box that stays put, a cube and a lid.
pub fn tidy_scene<T: Real>() -> SceneSpec<T> {
    table(vec![object("box", TIDY_BOX), object("cube", TIDY_CUBE), object("lid", TIDY_LID)])
}

/// The cube goes to the right of the box, then the lid to its left.
pub fn tidy_demos<T: Real>(n: usize, seed: u64) -> Vec<RawDemo<T>> {
    let scene = tidy_scene::<f64>();
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let boxp = on_table(
                &scene,
                TIDY_BOX[2],
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.25..-0.15),
                rng.random_range(-0.2..0.2),
            );
            let cube0 = on_table(
                &scene,
                TIDY_CUBE[2],
                rng.random_range(-0.4..-0.3),
                rng.random_range(0.15..0.3),
                rng.random_range(-1.0..1.0),
            );
            let lid0 = on_table(
                &scene,
                TIDY_LID[2],
                rng.random_range(0.3..0.45),
                rng.random_range(0.1..0.25),
                rng.random_range(-1.0..1.0),
            );
            let cube1 = boxp.compose(&noisy_offset(&mut rng, CUBE_OFFSET, 0.005, 0.03));
            let lid1 = boxp.compose(&noisy_offset(&mut rng, TIDY_LID_OFFSET, 0.005, 0.03));
            let start: WorldState<f64> = [(id("box"), boxp), (id("cube"), cube0), (id("lid"), lid0)].into_iter().collect();
            teach(&scene, &start, &[(id("cube"), cube1), (id("lid"), lid1)])
        })
        .collect()
}

const CAGE_CENTER: [f64; 2] = [0.38, 0.2];
const CAGE_INNER: f64 = 0.13;
const WALL_HALF_THICK: f64 = 0.01;
const WALL_HALF_HEIGHT: f64 = 0.2;

/// The tidy scene with the lid's corner walled in by four tall fixtures, and
/// a start state where the lid sits inside the walls.
pub fn caged_tidy<T: Real>() -> (SceneSpec<T>, WorldState<T>) {
    let mut scene = tidy_scene::<T>();
    let [cx, cy] = CAGE_CENTER;
    let off = CAGE_INNER + WALL_HALF_THICK;
    let long = CAGE_INNER + 2.0 * WALL_HALF_THICK;
    scene.objects.extend([
        fixture(
            "wall_n",
            [long, WALL_HALF_THICK, WALL_HALF_HEIGHT],
            [cx, cy + off, WALL_HALF_HEIGHT],
        ),
        fixture(
            "wall_s",
            [long, WALL_HALF_THICK, WALL_HALF_HEIGHT],
            [cx, cy - off, WALL_HALF_HEIGHT],
        ),
        fixture(
            "wall_e",
            [WALL_HALF_THICK, CAGE_INNER, WALL_HALF_HEIGHT],
            [cx + off, cy, WALL_HALF_HEIGHT],
        ),
        fixture(
            "wall_w",
            [WALL_HALF_THICK, CAGE_INNER, WALL_HALF_HEIGHT],
            [cx - off, cy, WALL_HALF_HEIGHT],
        ),
    ]);
    let f = T::of;
    let start: WorldState<T> = [
        (id("box"), on_table(&scene, f(TIDY_BOX[2]), f(-0.2), f(-0.15), f(0.1))),
        (id("cube"), on_table(&scene, f(TIDY_CUBE[2]), f(-0.35), f(0.25), f(0.4))),
        (id("lid"), on_table(&scene, f(TIDY_LID[2]), f(cx), f(cy), f(0.2))),
    ]
    .into_iter()
    .collect();
    (scene, start)
}

fn noisy_offset<R: Rng>(rng: &mut R, offset: [f64; 3], trans: f64, yaw: f64) -> Pose<f64> {
    let n = rand_distr::StandardNormal;
    let t = [
        offset[0] + trans * rng.sample::<f64, _>(n),
        offset[1] + trans * rng.sample::<f64, _>(n),
        offset[2],
    ];
    Pose::from_yaw(t, yaw * rng.sample::<f64, _>(n))
}

/// Frame trace of a teacher moving one object at a time along a raised arc,
/// with the hand just above the moved object and pauses between moves.
pub fn teach<T: Real>(scene: &SceneSpec<f64>, start: &WorldState<f64>, moves: &[(ObjectId, Pose<f64>)]) -> RawDemo<T> {
    let mut state = start.clone();
    let mut frames: Vec<(WorldState<f64>, Option<Pose<f64>>)> = Vec::new();
    let hand_over = |p: &Pose<f64>| {
        let t = p.translation();
        Pose::from_translation(t[0], t[1], t[2] + HAND_OFFSET)
    };
    for (obj, goal) in moves {
        let from = *state.pose(obj).expect("moved object in state");
        for _ in 0..PAUSE_FRAMES {
            frames.push((state.clone(), Some(hand_over(&from))));
        }
        for i in 1..=MOVE_FRAMES {
            let s = i as f64 / MOVE_FRAMES as f64;
            let mut p = from.interpolate(goal, s);
            let t = p.translation();
            p = p.with_translation([t[0], t[1], t[2] + ARC_HEIGHT * (std::f64::consts::PI * s).sin()]);
            if i == MOVE_FRAMES {
                p = *goal;
            }
            state.set(obj.clone(), p);
            frames.push((state.clone(), Some(hand_over(&p))));
        }
    }
    for _ in 0..PAUSE_FRAMES {
        frames.push((state.clone(), None));
    }
    let cast = |p: &Pose<f64>| {
        let t = p.translation().map(T::of);
        let q = p.rotation().map(T::of);
        Pose::new(t, q).expect("unit quaternion survives the cast")
    };
    RawDemo {
        objects: scene
            .objects
            .iter()
            .filter(|o| o.pose.is_none())
            .map(|o| DemoObject {
                id: o.id.clone(),
                shape: Some(ObjectShape {
                    half_extents: o.half_extents,
                }),
            })
            .collect(),
        frames: frames
            .into_iter()
            .enumerate()
            .map(|(i, (s, hand))| Frame {
                t: T::of(i as f64 * FRAME_DT),
                poses: s.iter().map(|(k, p)| (k.clone(), cast(p))).collect(),
                hand: hand.as_ref().map(cast),
            })
            .collect(),
    }
}

/// Draws every movable object uniformly over the support surface with a
/// uniform yaw, keeping the first feasible state.
pub fn random_start_state<T: Real, R: Rng + ?Sized>(scene: &SceneSpec<T>, rng: &mut R, max_attempts: usize) -> Option<WorldState<T>> {
    let [lo, hi] = scene.workspace;
    for _ in 0..max_attempts {
        let state: WorldState<T> = scene
            .objects
            .iter()
            .filter(|o| o.pose.is_none())
            .map(|o| {
                let x = rng.random_range(lo[0].as_f64()..hi[0].as_f64());
                let y = rng.random_range(lo[1].as_f64()..hi[1].as_f64());
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                (o.id.clone(), on_table(scene, o.half_extents[2], T::of(x), T::of(y), T::of(yaw)))
            })
            .collect();
        if state_feasible(scene, &state) {
            return Some(state);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demonstrations::{build_task_demo_set, SegmentationParams, SegmentedDemo};

    #[test]
    fn lid_box_demos_segment_into_two_actions() {
        let scene = lid_box_scene::<f64>();
        for raw in lid_box_demos::<f64>(5, 3) {
            raw.validate().unwrap();
            let seg = SegmentedDemo::from_raw(&raw, &SegmentationParams::default()).unwrap();
            let order: Vec<&str> = seg.segments.iter().map(|s| s.object_id.as_str()).collect();
            assert_eq!(order, ["box", "lid"]);
            assert!(state_feasible(&scene, &seg.segments[0].start_state));
            assert!(state_feasible(&scene, &seg.final_state));
        }
    }

    #[test]
    fn tidy_demos_leave_the_box_alone() {
        let scene = tidy_scene::<f64>();
        let demos = tidy_demos::<f64>(5, 4)
            .iter()
            .map(|r| SegmentedDemo::from_raw(r, &SegmentationParams::default()).unwrap())
            .collect::<Vec<_>>();
        for d in &demos {
            assert!(state_feasible(&scene, &d.segments[0].start_state));
            assert!(state_feasible(&scene, &d.final_state));
        }
        let set = build_task_demo_set(demos).unwrap();
        assert!(set.demos.iter().all(|d| d.segments.iter().all(|s| s.object_id.as_str() != "box")));
    }

    #[test]
    fn caged_start_is_feasible() {
        let (scene, start) = caged_tidy::<f64>();
        scene.validate().unwrap();
        assert!(state_feasible(&scene, &start));
    }

    #[test]
    fn random_starts_are_feasible_and_seeded() {
        let scene = lid_box_scene::<f64>();
        let a = random_start_state(&scene, &mut rng_from_seed(5), MAX_START_ATTEMPTS).unwrap();
        let b = random_start_state(&scene, &mut rng_from_seed(5), MAX_START_ATTEMPTS).unwrap();
        assert_eq!(a, b);
        assert!(state_feasible(&scene, &a));
    }
}
