//! Planner settings from flags, an optional JSON config file, and
//! model-derived defaults, in that order of precedence.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use serde::Deserialize;

use improvise::geometry::PoseDistanceParams;
use improvise::model::LearnedModel;
use improvise::planner::PlannerConfig;

#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlanFlags {
    /// JSON file with any of these settings, keyed by flag name
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Search iterations
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Goal samples per template
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(alias = "action-cost")]
    pub action_cost: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    #[serde(alias = "cluster-cutoff")]
    pub cluster_cutoff: Option<f64>,
    /// Kernel translation bandwidth in meters
    #[arg(long)]
    #[serde(alias = "sigma-t")]
    pub sigma_t: Option<f64>,
    /// Kernel rotation bandwidth in radians
    #[arg(long)]
    #[serde(alias = "sigma-r")]
    pub sigma_r: Option<f64>,
    #[arg(long)]
    #[serde(alias = "max-depth")]
    pub max_depth: Option<usize>,
    /// Trajectory waypoints per action
    #[arg(long)]
    pub waypoints: Option<usize>,
    /// Use template samples without kernel noise
    #[arg(long)]
    #[serde(default, alias = "no-noise")]
    pub no_noise: bool,
}

impl PlanFlags {
    /// Fills every unset field from `other`.
    pub fn or(self, other: PlanFlags) -> PlanFlags {
        PlanFlags {
            config: self.config.or(other.config),
            seed: self.seed.or(other.seed),
            iterations: self.iterations.or(other.iterations),
            samples: self.samples.or(other.samples),
            action_cost: self.action_cost.or(other.action_cost),
            tau0: self.tau0.or(other.tau0),
            cluster_cutoff: self.cluster_cutoff.or(other.cluster_cutoff),
            sigma_t: self.sigma_t.or(other.sigma_t),
            sigma_r: self.sigma_r.or(other.sigma_r),
            max_depth: self.max_depth.or(other.max_depth),
            waypoints: self.waypoints.or(other.waypoints),
            no_noise: self.no_noise || other.no_noise,
        }
    }

    /// Flags merged over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<PlanFlags> {
        match &self.config {
            Some(path) => {
                let file = load_config(path)?;
                Ok(self.or(file))
            }
            None => Ok(self),
        }
    }

    /// Kernel bandwidth from flags, falling back to `base`.
    pub fn bandwidth(&self, base: PoseDistanceParams<f64>) -> Result<PoseDistanceParams<f64>> {
        Ok(PoseDistanceParams::new(
            self.sigma_t.unwrap_or(base.sigma_t),
            self.sigma_r.unwrap_or(base.sigma_r),
        )?)
    }

    pub fn planner_config(&self, model: &LearnedModel<f64>) -> Result<PlannerConfig<f64>> {
        let bandwidth = self.bandwidth(model.bandwidth())?;
        let mut c = PlannerConfig::defaults_for(model.reference_likelihood()?, model.movable_objects(), bandwidth);
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.action_cost {
            c.action_cost = v;
        }
        if let Some(v) = self.tau0 {
            c.tau0 = v;
        }
        if let Some(v) = self.cluster_cutoff {
            c.cluster_cutoff = v;
        }
        if let Some(v) = self.max_depth {
            c.max_depth = v;
        }
        if let Some(v) = self.waypoints {
            c.waypoints = v;
        }
        c.noise = !self.no_noise;
        c.validate()?;
        Ok(c)
    }
}

pub fn load_config(path: &Path) -> Result<PlanFlags> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
