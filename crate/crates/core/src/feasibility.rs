//! Simulated geometric world: box collisions, an abstract reach test, and
//! lift-carry-place trajectories.

use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::{cross, dot3, norm3, Pose};
use crate::scalar::Real;
use crate::state::{ObjectId, WorldState};

/// Separation below which touching boxes still count as not overlapping.
pub const CONTACT_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SceneObject<T: Real> {
    pub id: ObjectId,
    #[serde(rename = "box")]
    pub half_extents: [T; 3],
    /// Pose of a fixture that never moves; used when a state omits the object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose<T>>,
}

/// Static description of the world the robot acts in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SceneSpec<T: Real> {
    /// Axis-aligned `[min, max]` corners.
    pub workspace: [[T; 3]; 2],
    pub support_height: T,
    pub reach_radius: T,
    pub lift_height: T,
    pub objects: Vec<SceneObject<T>>,
}

impl<T: Real> SceneSpec<T> {
    pub fn validate(&self) -> Result<(), SceneError> {
        for o in &self.objects {
            if o.half_extents.iter().any(|h| !(*h > T::zero() && h.is_finite())) {
                return Err(SceneError::BadExtents(o.id.clone()));
            }
        }
        let [lo, hi] = self.workspace;
        if (0..3).any(|i| !(hi[i] > lo[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(SceneError::DegenerateWorkspace);
        }
        if !(self.reach_radius > T::zero()) {
            return Err(SceneError::BadParameter("reach_radius"));
        }
        if !(self.lift_height >= T::zero()) {
            return Err(SceneError::BadParameter("lift_height"));
        }
        if !self.support_height.is_finite() {
            return Err(SceneError::BadParameter("support_height"));
        }
        Ok(())
    }

    pub fn object(&self, id: &ObjectId) -> Option<&SceneObject<T>> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn half_extents(&self, id: &ObjectId) -> Option<[T; 3]> {
        self.object(id).map(|o| o.half_extents)
    }

    /// Pose of `id` in `state`, falling back to the fixture pose.
    pub fn resolve_pose(&self, state: &WorldState<T>, id: &ObjectId) -> Option<Pose<T>> {
        state.pose(id).copied().or_else(|| self.object(id).and_then(|o| o.pose))
    }

    /// Checks that every scene object has a pose and every state object a shape.
    pub fn check_state(&self, state: &WorldState<T>) -> Result<(), SceneError> {
        for o in &self.objects {
            if self.resolve_pose(state, &o.id).is_none() {
                return Err(SceneError::MissingPose(o.id.clone()));
            }
        }
        for id in state.ids() {
            if self.object(id).is_none() {
                return Err(SceneError::UnknownObject(id.clone()));
            }
        }
        Ok(())
    }

    /// Objects whose pose comes from the scene rather than from states.
    pub fn fixtures(&self) -> impl Iterator<Item = &SceneObject<T>> {
        self.objects.iter().filter(|o| o.pose.is_some())
    }

    fn placed(&self, state: &WorldState<T>) -> Option<Vec<Placed<'_, T>>> {
        self.objects
            .iter()
            .map(|o| {
                Some(Placed {
                    id: &o.id,
                    half: o.half_extents,
                    pose: self.resolve_pose(state, &o.id)?,
                })
            })
            .collect()
    }
}

struct Placed<'a, T: Real> {
    id: &'a ObjectId,
    half: [T; 3],
    pose: Pose<T>,
}

/// Separating-axis test for two oriented boxes over the 15 candidate axes.
/// Boxes closer to touching than [`CONTACT_MARGIN`] do not overlap.
pub fn boxes_overlap<T: Real>(half_a: &[T; 3], pose_a: &Pose<T>, half_b: &[T; 3], pose_b: &Pose<T>) -> bool {
    let a = pose_a.axes();
    let b = pose_b.axes();
    let ta = pose_a.translation();
    let tb = pose_b.translation();
    let d = [tb[0] - ta[0], tb[1] - ta[1], tb[2] - ta[2]];
    let margin = T::of(CONTACT_MARGIN);
    let separated_on = |axis: [T; 3]| -> bool {
        let n = norm3(&axis);
        if n < T::of(1e-9) {
            return false;
        }
        let l = [axis[0] / n, axis[1] / n, axis[2] / n];
        let ra = (0..3).map(|i| half_a[i] * dot3(&a[i], &l).abs()).fold(T::zero(), |x, y| x + y);
        let rb = (0..3).map(|i| half_b[i] * dot3(&b[i], &l).abs()).fold(T::zero(), |x, y| x + y);
        dot3(&d, &l).abs() >= ra + rb - margin
    };
    for ax in a.iter().chain(b.iter()) {
        if separated_on(*ax) {
            return false;
        }
    }
    for ai in &a {
        for bj in &b {
            if separated_on(cross(ai, bj)) {
                return false;
            }
        }
    }
    true
}

/// World-axis-aligned bounds of an oriented box.
pub fn box_bounds<T: Real>(half: &[T; 3], pose: &Pose<T>) -> [[T; 3]; 2] {
    let ax = pose.axes();
    let c = pose.translation();
    let mut lo = c;
    let mut hi = c;
    for k in 0..3 {
        let r = (0..3).map(|i| half[i] * ax[i][k].abs()).fold(T::zero(), |x, y| x + y);
        lo[k] = c[k] - r;
        hi[k] = c[k] + r;
    }
    [lo, hi]
}

fn inside_bounds<T: Real>(b: &[[T; 3]; 2], lo: &[T; 3], hi: &[T; 3]) -> bool {
    let slack = T::of(1e-9);
    (0..3).all(|k| b[0][k] >= lo[k] - slack && b[1][k] <= hi[k] + slack)
}

/// True when the vertical line through `(x, y)` passes through the box.
fn in_footprint<T: Real>(x: T, y: T, half: &[T; 3], pose: &Pose<T>) -> bool {
    let ax = pose.axes();
    let c = pose.translation();
    let p = [x - c[0], y - c[1], -c[2]];
    let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
    for i in 0..3 {
        let u = dot3(&ax[i], &p);
        let v = ax[i][2];
        if v.abs() < T::of(1e-12) {
            if u.abs() > half[i] {
                return false;
            }
        } else {
            let s0 = (-half[i] - u) / v;
            let s1 = (half[i] - u) / v;
            lo = lo.max(s0.min(s1));
            hi = hi.min(s0.max(s1));
        }
    }
    lo <= hi
}

const REACH_RINGS: [f64; 4] = [1.0, 0.75, 0.5, 0.25];
const REACH_BEARINGS: usize = 24;

/// Abstract inverse-kinematics check: some floor point inside the workspace
/// rectangle, clear of every given footprint, lies within `reach_radius` of
/// `target`. Candidate stances are a fixed polar grid around the target.
fn reachable<T: Real>(scene: &SceneSpec<T>, target: &[T; 3], obstacles: &[(&[T; 3], &Pose<T>)]) -> bool {
    let [lo, hi] = scene.workspace;
    let dz = target[2] - lo[2];
    let r2 = scene.reach_radius * scene.reach_radius - dz * dz;
    if r2 < T::zero() {
        return false;
    }
    let rh = r2.sqrt();
    for ring in REACH_RINGS {
        for k in 0..REACH_BEARINGS {
            let ang = T::TAU() * T::of(k as f64 / REACH_BEARINGS as f64);
            let r = rh * T::of(ring);
            let x = target[0] + r * ang.cos();
            let y = target[1] + r * ang.sin();
            if x < lo[0] || x > hi[0] || y < lo[1] || y > hi[1] {
                continue;
            }
            if obstacles.iter().all(|(h, p)| !in_footprint(x, y, h, p)) {
                return true;
            }
        }
    }
    false
}

/// Collision-free, inside the workspace, and every object reachable.
/// States missing a scene object's pose are infeasible.
pub fn state_feasible<T: Real>(scene: &SceneSpec<T>, state: &WorldState<T>) -> bool {
    let Some(placed) = scene.placed(state) else {
        return false;
    };
    let [lo, hi] = scene.workspace;
    for (i, a) in placed.iter().enumerate() {
        if !inside_bounds(&box_bounds(&a.half, &a.pose), &lo, &hi) {
            return false;
        }
        for b in &placed[i + 1..] {
            if boxes_overlap(&a.half, &a.pose, &b.half, &b.pose) {
                return false;
            }
        }
    }
    let footprints: Vec<(&[T; 3], &Pose<T>)> = placed.iter().map(|p| (&p.half, &p.pose)).collect();
    placed.iter().all(|p| reachable(scene, &p.pose.translation(), &footprints))
}

/// Waypoints of one object's lift-carry-place motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Trajectory<T: Real> {
    pub object_id: ObjectId,
    pub waypoints: Vec<Pose<T>>,
    /// First carry waypoint.
    pub grasp_index: usize,
    /// First place waypoint.
    pub place_index: usize,
}

/// Lift by `lift_height` (a quarter of the waypoints), carry at height with
/// linear translation and shortest-arc rotation (half), and lower onto the
/// goal (a quarter). First and last waypoints are exactly start and goal.
pub fn generate_trajectory<T: Real>(
    scene: &SceneSpec<T>,
    state: &WorldState<T>,
    object: &ObjectId,
    goal: &Pose<T>,
    waypoints: usize,
) -> Result<Trajectory<T>, SceneError> {
    if waypoints < 4 {
        return Err(SceneError::BadParameter("waypoints"));
    }
    let start = scene
        .resolve_pose(state, object)
        .ok_or_else(|| SceneError::MissingPose(object.clone()))?;
    let n_lift = (waypoints / 4).max(1);
    let n_place = (waypoints / 4).max(2);
    let n_carry = waypoints - n_lift - n_place;
    let raise = |p: &Pose<T>| {
        let t = p.translation();
        p.with_translation([t[0], t[1], t[2] + scene.lift_height])
    };
    let lifted = raise(&start);
    let above_goal = raise(goal);
    let frac = |i: usize, n: usize| T::of(i as f64 / n as f64);

    let mut pts = Vec::with_capacity(waypoints);
    for i in 0..n_lift {
        let t = start.interpolate(&lifted, frac(i, n_lift)).translation();
        pts.push(start.with_translation(t));
    }
    for i in 0..n_carry {
        pts.push(lifted.interpolate(&above_goal, frac(i, n_carry)));
    }
    for i in 0..n_place {
        let t = above_goal.interpolate(goal, frac(i, n_place - 1)).translation();
        pts.push(goal.with_translation(t));
    }
    pts[0] = start;
    pts[waypoints - 1] = *goal;
    Ok(Trajectory {
        object_id: object.clone(),
        waypoints: pts,
        grasp_index: n_lift,
        place_index: n_lift + n_carry,
    })
}

/// Outcome of checking a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryCheck {
    Feasible,
    Blocked { waypoint: usize },
}

impl TrajectoryCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, TrajectoryCheck::Feasible)
    }
}

/// Checks every waypoint of the moved box against the other objects, the
/// workspace raised by `lift_height`, and reachability; the last waypoint
/// must also leave the whole scene in a feasible state.
pub fn trajectory_feasible<T: Real>(scene: &SceneSpec<T>, state: &WorldState<T>, traj: &Trajectory<T>) -> TrajectoryCheck {
    let last = traj.waypoints.len().saturating_sub(1);
    let (Some(half), Some(placed)) = (scene.half_extents(&traj.object_id), scene.placed(state)) else {
        return TrajectoryCheck::Blocked { waypoint: 0 };
    };
    let others: Vec<&Placed<T>> = placed.iter().filter(|p| *p.id != traj.object_id).collect();
    let footprints: Vec<(&[T; 3], &Pose<T>)> = others.iter().map(|p| (&p.half, &p.pose)).collect();
    let [lo, mut hi] = scene.workspace;
    hi[2] = hi[2] + scene.lift_height;
    for (i, w) in traj.waypoints.iter().enumerate() {
        let ok = inside_bounds(&box_bounds(&half, w), &lo, &hi)
            && others.iter().all(|o| !boxes_overlap(&half, w, &o.half, &o.pose))
            && reachable(scene, &w.translation(), &footprints);
        if !ok {
            return TrajectoryCheck::Blocked { waypoint: i };
        }
    }
    let end = state.with_pose(&traj.object_id, traj.waypoints[last]);
    if !state_feasible(scene, &end) {
        return TrajectoryCheck::Blocked { waypoint: last };
    }
    TrajectoryCheck::Feasible
}
