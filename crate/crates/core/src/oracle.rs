//! Brute-force baselines: exhaustive plan enumeration over fixed candidate
//! goals, and the matching candidate injector for the planner.

use std::collections::BTreeMap;

use crate::actions::{ActionModel, ActionTemplate, GoalCandidate};
use crate::error::PlanError;
use crate::feasibility::{generate_trajectory, trajectory_feasible, SceneSpec};
use crate::geometry::Pose;
use crate::intention::GoalScorer;
use crate::planner::GoalGenerator;
use crate::scalar::Real;
use crate::state::WorldState;

/// Fixed relative goal poses keyed by `(action id, template id)`.
pub type CandidateTable<T> = BTreeMap<(String, String), Vec<Pose<T>>>;

/// Upper bound on the number of plans the oracle will walk.
pub const PATH_GUARD: u128 = 1_000_000;

/// World-frame goal for a relative candidate: the reference object's pose
/// composed with `rel`.
pub fn place_candidate<T: Real>(
    action: &ActionModel<T>,
    template: &ActionTemplate<T>,
    state: &WorldState<T>,
    rel: &Pose<T>,
) -> Option<WorldState<T>> {
    let moved = action.object_id.as_ref()?;
    let reference = state.pose(template.reference_object(moved))?;
    Some(state.with_pose(moved, reference.compose(rel)))
}

/// Goal generator that hands out the same candidates on every expansion.
#[derive(Clone, Debug)]
pub struct InjectedGoals<T: Real> {
    table: CandidateTable<T>,
}

impl<T: Real> GoalGenerator<T> for InjectedGoals<T> {
    fn candidates(
        &self,
        action: &ActionModel<T>,
        template: &ActionTemplate<T>,
        state: &WorldState<T>,
        _seed: u64,
    ) -> Result<Vec<GoalCandidate<T>>, PlanError> {
        let key = (action.action_id.clone(), template.template_id());
        let rels = self.table.get(&key).ok_or_else(|| PlanError::MissingCandidates {
            action: key.0.clone(),
            template: key.1.clone(),
        })?;
        let p = T::one() / T::of(rels.len() as f64);
        rels.iter()
            .map(|rel| {
                let state = place_candidate(action, template, state, rel).ok_or_else(|| PlanError::MissingCandidates {
                    action: key.0.clone(),
                    template: key.1.clone(),
                })?;
                Ok(GoalCandidate {
                    state,
                    probability: p,
                    cluster_size: 1,
                })
            })
            .collect()
    }
}

/// Checks that `table` covers every template of every real action.
pub fn inject_candidates<T: Real>(actions: &[ActionModel<T>], table: CandidateTable<T>) -> Result<InjectedGoals<T>, PlanError> {
    for a in actions.iter().filter(|a| !a.is_noop) {
        for t in &a.templates {
            let key = (a.action_id.clone(), t.template_id());
            if table.get(&key).is_none_or(|c| c.is_empty()) {
                return Err(PlanError::MissingCandidates {
                    action: key.0,
                    template: key.1,
                });
            }
        }
    }
    Ok(InjectedGoals { table })
}

/// A planning instance with no sampling.
pub struct DiscretizedProblem<'a, T: Real> {
    pub scorer: &'a dyn GoalScorer<T>,
    pub actions: &'a [ActionModel<T>],
    pub candidates: &'a CandidateTable<T>,
    pub scene: &'a SceneSpec<T>,
    pub start: WorldState<T>,
    pub horizon: usize,
    pub action_cost: T,
    pub waypoints: usize,
}

/// One step of an enumerated plan.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleStep<T: Real> {
    pub action: String,
    pub template: String,
    pub goal_state: WorldState<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<T: Real> {
    pub value: T,
    pub steps: Vec<OracleStep<T>>,
    pub final_state: WorldState<T>,
    /// Plans scored, including the empty one.
    pub plans_scored: u64,
}

impl<T: Real> DiscretizedProblem<'_, T> {
    fn branching(&self) -> Result<u128, PlanError> {
        let mut b = 0u128;
        for a in self.actions.iter().filter(|a| !a.is_noop) {
            for t in &a.templates {
                let key = (a.action_id.clone(), t.template_id());
                let n = self.candidates.get(&key).map_or(0, Vec::len);
                if n == 0 {
                    return Err(PlanError::MissingCandidates {
                        action: key.0,
                        template: key.1,
                    });
                }
                b += n as u128;
            }
        }
        Ok(b)
    }

    /// Number of action sequences of length at most `horizon`.
    pub fn path_count(&self) -> Result<u128, PlanError> {
        let b = self.branching()?;
        let mut total = 0u128;
        let mut level = 1u128;
        for _ in 0..=self.horizon {
            total = total.saturating_add(level);
            level = level.saturating_mul(b);
        }
        Ok(total)
    }
}

/// Walks every sequence of up to `horizon` candidate moves whose
/// trajectories are feasible and returns the best `psi - steps * cost`.
/// Ties keep the first plan found in action, template, candidate order.
pub fn enumerate_optimal<T: Real>(problem: &DiscretizedProblem<'_, T>) -> Result<OracleResult<T>, PlanError> {
    let count = problem.path_count()?;
    if count > PATH_GUARD {
        return Err(PlanError::GuardExceeded { count, limit: PATH_GUARD });
    }
    let mut best = OracleResult {
        value: T::neg_infinity(),
        steps: Vec::new(),
        final_state: problem.start.clone(),
        plans_scored: 0,
    };
    let mut path = Vec::new();
    dfs(problem, &problem.start, &mut path, &mut best)?;
    Ok(best)
}

fn dfs<T: Real>(
    p: &DiscretizedProblem<'_, T>,
    state: &WorldState<T>,
    path: &mut Vec<OracleStep<T>>,
    best: &mut OracleResult<T>,
) -> Result<(), PlanError> {
    let value = p.scorer.score(state)? - p.action_cost * T::of(path.len() as f64);
    best.plans_scored += 1;
    if value > best.value {
        best.value = value;
        best.steps = path.clone();
        best.final_state = state.clone();
    }
    if path.len() == p.horizon {
        return Ok(());
    }
    for a in p.actions.iter().filter(|a| !a.is_noop) {
        let moved = a.object_id.as_ref().expect("real action moves an object");
        for t in &a.templates {
            let key = (a.action_id.clone(), t.template_id());
            for rel in &p.candidates[&key] {
                let Some(next) = place_candidate(a, t, state, rel) else { continue };
                let goal = next.pose(moved).expect("placed object");
                let traj = generate_trajectory(p.scene, state, moved, goal, p.waypoints)?;
                if !trajectory_feasible(p.scene, state, &traj).is_feasible() {
                    continue;
                }
                path.push(OracleStep {
                    action: key.0.clone(),
                    template: key.1.clone(),
                    goal_state: next.clone(),
                });
                dfs(p, &next, path, best)?;
                path.pop();
            }
        }
    }
    Ok(())
}
