//! The learned-model file: intention, action models, and the demonstrated
//! goal states used to scale planner defaults and judge trials.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::{build_action_models, ActionModel};
use crate::demonstrations::{build_task_demo_set, extract_final_relations, RawDemo, SegmentationParams, SegmentedDemo, TaskDemoSet};
use crate::error::{LearnError, ModelError};
use crate::geometry::PoseDistanceParams;
use crate::intention::{IntentionConfig, IntentionModel};
use crate::scalar::Real;
use crate::state::WorldState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LearnedModel<T: Real> {
    pub intention: IntentionModel<T>,
    pub actions: Vec<ActionModel<T>>,
    pub demo_finals: Vec<WorldState<T>>,
}

impl<T: Real> LearnedModel<T> {
    pub fn learn(set: &TaskDemoSet<T>, config: &IntentionConfig<T>) -> Result<Self, ModelError> {
        let relations = extract_final_relations(set);
        Ok(Self {
            intention: IntentionModel::learn(&relations, config)?,
            actions: build_action_models(set),
            demo_finals: set.final_states().cloned().collect(),
        })
    }

    /// Segments raw traces, assembles the demo set, and learns from it.
    pub fn from_raw_demos(raws: &[RawDemo<T>], seg: &SegmentationParams<T>, config: &IntentionConfig<T>) -> Result<Self, LearnError> {
        let demos = raws
            .iter()
            .map(|r| SegmentedDemo::from_raw(r, seg))
            .collect::<Result<Vec<_>, _>>()?;
        let set = build_task_demo_set(demos)?;
        Ok(Self::learn(&set, config)?)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.intention.validate()?;
        for a in &self.actions {
            a.validate()?;
        }
        if self.demo_finals.is_empty() {
            return Err(ModelError::Invalid("model has no demonstrated goal states".into()));
        }
        Ok(())
    }

    /// Likelihood of the first demonstrated goal; the scale for default cost
    /// and temperature.
    pub fn reference_likelihood(&self) -> Result<T, ModelError> {
        self.intention.likelihood(&self.demo_finals[0])
    }

    pub fn mean_demo_likelihood(&self) -> Result<T, ModelError> {
        let mut acc = T::zero();
        for s in &self.demo_finals {
            acc = acc + self.intention.likelihood(s)?;
        }
        Ok(acc / T::of(self.demo_finals.len() as f64))
    }

    pub fn movable_objects(&self) -> usize {
        self.actions.iter().filter(|a| !a.is_noop).count()
    }

    /// Kernel bandwidth of the first relation.
    pub fn bandwidth(&self) -> PoseDistanceParams<T> {
        self.intention.relations.first().map(|r| r.bandwidth).unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: Self = serde_json::from_str(text).map_err(|e| ModelError::Invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ModelError::Invalid(format!("{}: {e}", path.display())))
    }
}
