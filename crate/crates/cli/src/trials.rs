//! Randomized start-state trials with full/partial/failure classification.

use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use improvise::feasibility::SceneSpec;
use improvise::model::LearnedModel;
use improvise::planner::{solve_task, PlannerConfig};
use improvise::sampling::rng_from_seed;
use improvise::state::WorldState;
use improvise::tasks::{random_start_state, MAX_START_ATTEMPTS};

/// A plan counts as a full solution when its final likelihood reaches this
/// fraction of the mean likelihood of the demonstrated goals.
pub const FULL_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Full,
    Partial,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub value: Option<f64>,
    pub final_psi: Option<f64>,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub trials: usize,
    pub full_successes: usize,
    pub partial_solutions: usize,
    pub failures: usize,
    pub threshold: f64,
    pub records: Vec<TrialRecord>,
}

/// Runs `n` trials in parallel. Trial `i` uses seed `config.seed + i` for
/// both its start state and its search. A fixed `start` replaces sampling.
pub fn run_trials(
    model: &LearnedModel<f64>,
    scene: &SceneSpec<f64>,
    n: usize,
    config: PlannerConfig<f64>,
    start: Option<&WorldState<f64>>,
) -> Result<RunReport> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let threshold = FULL_FRACTION * model.mean_demo_likelihood()?;
    let starts: Vec<WorldState<f64>> = match start {
        Some(s) => vec![s.clone(); n],
        None => (0..n)
            .map(|i| {
                let mut rng = rng_from_seed(config.seed.wrapping_add(i as u64));
                random_start_state(scene, &mut rng, MAX_START_ATTEMPTS)
                    .ok_or_else(|| anyhow::anyhow!("workspace too constrained: no feasible start after {MAX_START_ATTEMPTS} attempts"))
            })
            .collect::<Result<_>>()?,
    };
    let records: Vec<TrialRecord> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s0)| {
            let seed = config.seed.wrapping_add(i as u64);
            let cfg = PlannerConfig { seed, ..config };
            let clock = Instant::now();
            let result = solve_task(&model.intention, &model.actions, scene, &s0, cfg);
            let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(plan) => {
                    let psi = model.intention.likelihood(&plan.final_state).unwrap_or(f64::NEG_INFINITY);
                    let outcome = if psi >= threshold {
                        Outcome::Full
                    } else if !plan.steps.is_empty() {
                        Outcome::Partial
                    } else {
                        Outcome::Failure
                    };
                    TrialRecord {
                        index: i,
                        seed,
                        outcome,
                        steps: plan.steps.len(),
                        value: Some(plan.value),
                        final_psi: Some(psi),
                        wall_ms,
                        error: None,
                    }
                }
                Err(e) => TrialRecord {
                    index: i,
                    seed,
                    outcome: Outcome::Failure,
                    steps: 0,
                    value: None,
                    final_psi: None,
                    wall_ms,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let count = |o| records.iter().filter(|r| r.outcome == o).count();
    Ok(RunReport {
        trials: n,
        full_successes: count(Outcome::Full),
        partial_solutions: count(Outcome::Partial),
        failures: count(Outcome::Failure),
        threshold,
        records,
    })
}
