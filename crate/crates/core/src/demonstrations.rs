//! Demonstration traces: loading, segmentation into single-object actions,
//! and extraction of the relative-pose samples that the learned models use.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::TemplateFrame;
use crate::error::DemoError;
use crate::geometry::{relative_pose, Pose};
use crate::scalar::Real;
use crate::state::{ObjectId, WorldState};

/// One recorded instant of a demonstration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Frame<T: Real> {
    pub t: T,
    pub poses: WorldState<T>,
    #[serde(default)]
    pub hand: Option<Pose<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    #[serde(rename = "box")]
    pub half_extents: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoObject {
    pub id: ObjectId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ObjectShape>,
}

/// A validated, time-ordered state stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RawDemo<T: Real> {
    #[serde(default)]
    pub objects: Vec<DemoObject>,
    pub frames: Vec<Frame<T>>,
}

impl<T: Real> RawDemo<T> {
    /// Checks that the trace is non-empty, strictly increasing in time, and
    /// holds the same object set in every frame.
    pub fn validate(&self) -> Result<(), DemoError> {
        let first = self.frames.first().ok_or(DemoError::Empty)?;
        let ids: Vec<&ObjectId> = first.poses.ids().collect();
        for (i, f) in self.frames.iter().enumerate() {
            if !f.t.is_finite() {
                return Err(DemoError::NonMonotoneTime { frame: i, t: f.t.as_f64() });
            }
            if i > 0 && !(f.t > self.frames[i - 1].t) {
                return Err(DemoError::NonMonotoneTime { frame: i, t: f.t.as_f64() });
            }
            if !f.poses.ids().eq(ids.iter().copied()) {
                return Err(DemoError::InconsistentObjects { frame: i });
            }
        }
        Ok(())
    }

    pub fn object_ids(&self) -> Vec<ObjectId> {
        self.frames.first().map(|f| f.poses.ids().cloned().collect()).unwrap_or_default()
    }
}

/// One manipulation: `object` moves from its pose in `start_state` to its
/// pose in `end_state` along `path`; everything else stays put.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ActionSegment<T: Real> {
    #[serde(rename = "object")]
    pub object_id: ObjectId,
    #[serde(rename = "start")]
    pub start_state: WorldState<T>,
    #[serde(rename = "end")]
    pub end_state: WorldState<T>,
    pub path: Vec<Pose<T>>,
    /// Frame indices `[start, end]` in the source trace, when segmented from one.
    #[serde(skip)]
    pub frames: Option<(usize, usize)>,
}

/// A demonstration split into action segments plus its goal state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SegmentedDemo<T: Real> {
    pub segments: Vec<ActionSegment<T>>,
    #[serde(rename = "final")]
    pub final_state: WorldState<T>,
}

/// Either form of demonstration file.
#[derive(Clone, Debug, PartialEq)]
pub enum DemoSource<T: Real> {
    Raw(RawDemo<T>),
    Segmented(SegmentedDemo<T>),
}

#[derive(Deserialize)]
#[serde(untagged)]
#[serde(bound(deserialize = "T: Real"))]
enum DemoFile<T: Real> {
    Raw(RawDemo<T>),
    Segmented(SegmentedDemo<T>),
}

/// Thresholds for splitting a trace into action segments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SegmentationParams<T: Real> {
    /// Per-frame motion magnitude above which an object counts as moving.
    pub eps_move: T,
    /// Minimum number of moving frames for a segment, and the largest static
    /// gap that still merges two runs of the same object.
    pub min_frames: usize,
    /// Maximum hand-object distance for a moving object to count as handled.
    pub hand_radius: T,
    /// Meters of motion equivalent to one radian of rotation.
    pub rotation_lever: T,
}

impl<T: Real> Default for SegmentationParams<T> {
    fn default() -> Self {
        Self {
            eps_move: T::of(1e-3),
            min_frames: 3,
            hand_radius: T::of(0.15),
            rotation_lever: T::of(0.1),
        }
    }
}

/// Largest motion of a non-manipulated object tolerated within one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticTolerance<T: Real> {
    pub translation: T,
    pub rotation: T,
}

impl<T: Real> Default for StaticTolerance<T> {
    fn default() -> Self {
        Self {
            translation: T::of(0.005),
            rotation: T::of(2f64.to_radians()),
        }
    }
}

impl<T: Real> StaticTolerance<T> {
    pub fn holds(&self, a: &Pose<T>, b: &Pose<T>) -> bool {
        let ta = a.translation();
        let tb = b.translation();
        let d = ((ta[0] - tb[0]).powi(2) + (ta[1] - tb[1]).powi(2) + (ta[2] - tb[2]).powi(2)).sqrt();
        d < self.translation && a.angle_to(b) < self.rotation
    }
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, DemoError> {
    let text = std::fs::read_to_string(path).map_err(|source| DemoError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| DemoError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Loads a frame-stream demonstration file and validates it.
pub fn load_demo<T: Real>(path: &Path) -> Result<RawDemo<T>, DemoError> {
    let raw: RawDemo<T> = read_json(path)?;
    raw.validate().map_err(|e| DemoError::Invalid {
        path: path.to_owned(),
        source: Box::new(e),
    })?;
    Ok(raw)
}

/// Loads either a frame-stream or a pre-segmented demonstration file.
pub fn load_demo_source<T: Real>(path: &Path) -> Result<DemoSource<T>, DemoError> {
    match read_json::<DemoFile<T>>(path)? {
        DemoFile::Raw(raw) => {
            raw.validate().map_err(|e| DemoError::Invalid {
                path: path.to_owned(),
                source: Box::new(e),
            })?;
            Ok(DemoSource::Raw(raw))
        }
        DemoFile::Segmented(s) => Ok(DemoSource::Segmented(s)),
    }
}

fn motion<T: Real>(a: &Pose<T>, b: &Pose<T>, lever: T) -> T {
    let ta = a.translation();
    let tb = b.translation();
    let d = ((ta[0] - tb[0]).powi(2) + (ta[1] - tb[1]).powi(2) + (ta[2] - tb[2]).powi(2)).sqrt();
    d + lever * a.angle_to(b)
}

struct Run {
    object: usize,
    first: usize,
    last: usize,
    moving: usize,
}

/// Splits a trace into single-object action segments ordered by start time.
///
/// Transition `i` (between frames `i - 1` and `i`) is attributed to the one
/// object whose motion exceeds `eps_move`; two such objects at once is an
/// error. Runs of the same object separated by fewer than `min_frames`
/// static transitions are merged, and runs with fewer than `min_frames`
/// moving transitions are dropped.
pub fn segment<T: Real>(raw: &RawDemo<T>, params: &SegmentationParams<T>) -> Result<Vec<ActionSegment<T>>, DemoError> {
    if !(params.eps_move > T::zero()) || params.min_frames < 1 {
        return Err(DemoError::InvalidSegmentationParams);
    }
    raw.validate()?;
    let ids = raw.object_ids();
    let frames = &raw.frames;

    let mut movers: Vec<Option<usize>> = vec![None; frames.len()];
    for i in 1..frames.len() {
        let mut found: Option<usize> = None;
        for (k, id) in ids.iter().enumerate() {
            let (Some(prev), Some(cur)) = (frames[i - 1].poses.pose(id), frames[i].poses.pose(id)) else {
                continue;
            };
            if motion(prev, cur, params.rotation_lever) > params.eps_move {
                if let Some(j) = found {
                    return Err(DemoError::AmbiguousCoMovement {
                        frame: i,
                        first: ids[j].clone(),
                        second: id.clone(),
                    });
                }
                found = Some(k);
            }
        }
        movers[i] = found.filter(|&k| match &frames[i].hand {
            Some(hand) => {
                let h = hand.translation();
                let o = frames[i].poses.pose(&ids[k]).map(|p| p.translation()).unwrap_or(h);
                let d = ((h[0] - o[0]).powi(2) + (h[1] - o[1]).powi(2) + (h[2] - o[2]).powi(2)).sqrt();
                d <= params.hand_radius
            }
            None => true,
        });
    }

    let mut runs: Vec<Run> = Vec::new();
    for (i, m) in movers.iter().enumerate() {
        let Some(k) = *m else { continue };
        match runs.last_mut() {
            Some(r) if r.object == k && i - r.last - 1 < params.min_frames => {
                r.last = i;
                r.moving += 1;
            }
            _ => runs.push(Run {
                object: k,
                first: i,
                last: i,
                moving: 1,
            }),
        }
    }

    let segments = runs
        .into_iter()
        .filter(|r| r.moving >= params.min_frames)
        .map(|r| {
            let id = &ids[r.object];
            let (start, end) = (r.first - 1, r.last);
            ActionSegment {
                object_id: id.clone(),
                start_state: frames[start].poses.clone(),
                end_state: frames[end].poses.clone(),
                path: (start..=end).filter_map(|f| frames[f].poses.pose(id).copied()).collect(),
                frames: Some((start, end)),
            }
        })
        .collect();
    Ok(segments)
}

impl<T: Real> SegmentedDemo<T> {
    /// Segments a raw trace; the goal state is the trace's last frame.
    pub fn from_raw(raw: &RawDemo<T>, params: &SegmentationParams<T>) -> Result<Self, DemoError> {
        let segments = segment(raw, params)?;
        let final_state = raw.frames.last().ok_or(DemoError::Empty)?.poses.clone();
        Ok(Self { segments, final_state })
    }

    pub fn from_source(source: DemoSource<T>, params: &SegmentationParams<T>) -> Result<Self, DemoError> {
        match source {
            DemoSource::Raw(raw) => Self::from_raw(&raw, params),
            DemoSource::Segmented(s) => Ok(s),
        }
    }
}

/// All demonstrations of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskDemoSet<T: Real> {
    pub demos: Vec<SegmentedDemo<T>>,
    pub object_ids: Vec<ObjectId>,
}

impl<T: Real> TaskDemoSet<T> {
    /// Number of demonstrations.
    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn final_states(&self) -> impl Iterator<Item = &WorldState<T>> {
        self.demos.iter().map(|d| &d.final_state)
    }
}

fn check_segment<T: Real>(index: usize, seg: &ActionSegment<T>, ids: &[ObjectId], tol: &StaticTolerance<T>) -> Result<(), DemoError> {
    for id in ids {
        let missing = || DemoError::MissingObject { index, object: id.clone() };
        let a = seg.start_state.pose(id).ok_or_else(missing)?;
        let b = seg.end_state.pose(id).ok_or_else(missing)?;
        if *id != seg.object_id && !tol.holds(a, b) {
            return Err(DemoError::StaticObjectMoved {
                index,
                object: id.clone(),
                manipulated: seg.object_id.clone(),
            });
        }
    }
    let eps = T::of(1e-9);
    let start = seg.start_state.pose(&seg.object_id);
    let end = seg.end_state.pose(&seg.object_id);
    match (seg.path.first(), seg.path.last(), start, end) {
        (Some(p0), Some(p1), Some(s), Some(e)) if p0.approx_eq_rotation_invariant(s, eps) && p1.approx_eq_rotation_invariant(e, eps) => {
            Ok(())
        }
        _ => Err(DemoError::BadPath { index }),
    }
}

/// Assembles and cross-checks segmented demonstrations of one task.
pub fn build_task_demo_set<T: Real>(demos: Vec<SegmentedDemo<T>>) -> Result<TaskDemoSet<T>, DemoError> {
    build_task_demo_set_with(demos, &StaticTolerance::default())
}

pub fn build_task_demo_set_with<T: Real>(demos: Vec<SegmentedDemo<T>>, tol: &StaticTolerance<T>) -> Result<TaskDemoSet<T>, DemoError> {
    let first = demos.first().ok_or(DemoError::NoDemos)?;
    let object_ids: Vec<ObjectId> = first.final_state.ids().cloned().collect();
    let id_set: BTreeSet<&ObjectId> = object_ids.iter().collect();
    for (n, demo) in demos.iter().enumerate() {
        if !demo.final_state.ids().eq(id_set.iter().copied()) {
            return Err(DemoError::ObjectSetMismatch { demo: n });
        }
        let last = demo.segments.last().ok_or(DemoError::NoSegments { demo: n })?;
        for (i, seg) in demo.segments.iter().enumerate() {
            check_segment(i, seg, &object_ids, tol)?;
        }
        let matches = object_ids
            .iter()
            .all(|id| match (last.end_state.pose(id), demo.final_state.pose(id)) {
                (Some(a), Some(b)) => tol.holds(a, b),
                _ => false,
            });
        if !matches {
            return Err(DemoError::FinalStateMismatch { demo: n });
        }
    }
    Ok(TaskDemoSet { demos, object_ids })
}

/// Ordered object pair `(k, l)`: the pose of `k` is expressed relative to `l`.
pub type ObjectPair = (ObjectId, ObjectId);

/// For every ordered pair `(k, l)`, the pose of `k` relative to `l` in each
/// demonstration's goal state.
pub fn extract_final_relations<T: Real>(set: &TaskDemoSet<T>) -> BTreeMap<ObjectPair, Vec<Pose<T>>> {
    let mut out = BTreeMap::new();
    for k in &set.object_ids {
        for l in &set.object_ids {
            if k == l {
                continue;
            }
            let samples = set
                .final_states()
                .filter_map(|s| Some(relative_pose(s.pose(l)?, s.pose(k)?)))
                .collect();
            out.insert((k.clone(), l.clone()), samples);
        }
    }
    out
}

/// Per manipulated object and per template frame, the end pose of the object
/// in each of its segments, relative to the template's reference.
pub fn extract_action_samples<T: Real>(set: &TaskDemoSet<T>) -> BTreeMap<ObjectId, BTreeMap<TemplateFrame, Vec<Pose<T>>>> {
    let mut out: BTreeMap<ObjectId, BTreeMap<TemplateFrame, Vec<Pose<T>>>> = BTreeMap::new();
    for seg in set.demos.iter().flat_map(|d| d.segments.iter()) {
        let k = &seg.object_id;
        let (Some(start), Some(end)) = (seg.start_state.pose(k), seg.end_state.pose(k)) else {
            continue;
        };
        let templates = out.entry(k.clone()).or_default();
        for l in &set.object_ids {
            if l == k {
                continue;
            }
            if let Some(reference) = seg.end_state.pose(l) {
                templates
                    .entry(TemplateFrame::Object(l.clone()))
                    .or_default()
                    .push(relative_pose(reference, end));
            }
        }
        templates.entry(TemplateFrame::Itself).or_default().push(relative_pose(start, end));
    }
    out
}
