//! Learning task goals and action models from demonstrations, and planning
//! object rearrangements that reproduce them.
//!
//! Every numeric type is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, with `F32` variants.

// NaN must fail validation, so `!(x > 0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actions;
pub mod clustering;
pub mod demonstrations;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod intention;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod sampling;
pub mod scalar;
pub mod state;
pub mod tasks;

pub use error::{DemoError, GeometryError, LearnError, ModelError, PlanError, SceneError};
pub use scalar::Real;
pub use state::ObjectId;

pub type Pose = geometry::Pose<f64>;
pub type WorldState = state::WorldState<f64>;
pub type SceneSpec = feasibility::SceneSpec<f64>;
pub type IntentionModel = intention::IntentionModel<f64>;
pub type ActionModel = actions::ActionModel<f64>;
pub type LearnedModel = model::LearnedModel<f64>;
pub type PlannerConfig = planner::PlannerConfig<f64>;
pub type Plan = planner::Plan<f64>;

pub type PoseF32 = geometry::Pose<f32>;
pub type WorldStateF32 = state::WorldState<f32>;
pub type SceneSpecF32 = feasibility::SceneSpec<f32>;
pub type IntentionModelF32 = intention::IntentionModel<f32>;
pub type ActionModelF32 = actions::ActionModel<f32>;
pub type LearnedModelF32 = model::LearnedModel<f32>;
pub type PlannerConfigF32 = planner::PlannerConfig<f32>;
pub type PlanF32 = planner::Plan<f32>;
