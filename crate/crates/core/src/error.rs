use std::path::PathBuf;

use thiserror::Error;

use crate::state::ObjectId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("quaternion has zero or non-finite norm")]
    DegenerateRotation,
    #[error("pose contains a non-finite value")]
    NonFinite,
    #[error("bandwidths must be finite and strictly positive")]
    InvalidBandwidth,
    #[error("cannot average an empty cluster")]
    EmptyCluster,
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: Box<DemoError>,
    },
    #[error("empty demonstration")]
    Empty,
    #[error("frame {frame}: timestamp {t} does not increase on the previous frame")]
    NonMonotoneTime { frame: usize, t: f64 },
    #[error("frame {frame}: object set differs from the first frame")]
    InconsistentObjects { frame: usize },
    #[error("frame {frame}: ambiguous co-movement of {first} and {second}")]
    AmbiguousCoMovement { frame: usize, first: ObjectId, second: ObjectId },
    #[error("segmentation parameters must satisfy eps_move > 0 and min_frames >= 1")]
    InvalidSegmentationParams,
    #[error("segment {index}: object {object} is missing from the segment states")]
    MissingObject { index: usize, object: ObjectId },
    #[error("segment {index}: object {object} moved although {manipulated} was manipulated")]
    StaticObjectMoved {
        index: usize,
        object: ObjectId,
        manipulated: ObjectId,
    },
    #[error("segment {index}: path must start at the start pose and end at the end pose")]
    BadPath { index: usize },
    #[error("demonstration {demo} contains no action segments")]
    NoSegments { demo: usize },
    #[error("demonstration {demo} final state does not match the end of its last segment")]
    FinalStateMismatch { demo: usize },
    #[error("demonstration {demo} object set differs from demonstration 0")]
    ObjectSetMismatch { demo: usize },
    #[error("no demonstrations given")]
    NoDemos,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state is missing object {0}")]
    MissingObject(ObjectId),
    #[error("relation ({0}, {1}) has no samples")]
    EmptyRelation(ObjectId, ObjectId),
    #[error("at least one relation is required")]
    NoRelations,
    #[error("entropy sample count must be at least 1")]
    NoEntropySamples,
    #[error("the no-op action has no templates")]
    NoopHasNoTemplates,
    #[error("template {0} does not belong to action {1}")]
    ForeignTemplate(String, String),
    #[error("goal sample count must be at least 1")]
    NoGoalSamples,
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("object {0} has non-positive half-extents")]
    BadExtents(ObjectId),
    #[error("scene has invalid {0}")]
    BadParameter(&'static str),
    #[error("workspace bounds are degenerate")]
    DegenerateWorkspace,
    #[error("object {0} has no pose in the state and no fixed pose in the scene")]
    MissingPose(ObjectId),
    #[error("object {0} in the state is not described by the scene")]
    UnknownObject(ObjectId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start state is infeasible")]
    InfeasibleStart,
    #[error("no feasible plan")]
    NoFeasiblePlan,
    #[error("root node has not been expanded")]
    RootUnexpanded,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no injected candidates for action {action} template {template}")]
    MissingCandidates { action: String, template: String },
    #[error("path count {count} exceeds the enumeration guard {limit}")]
    GuardExceeded { count: u128, limit: u128 },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
