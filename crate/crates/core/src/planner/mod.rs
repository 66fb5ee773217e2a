//! Three-layer Monte Carlo tree search over object moves.
//!
//! Action-selection nodes hold world states. Their children are one
//! template-selection node per movable object plus a terminal no-op; each
//! template-selection node has one goal-selection child per template; each
//! goal-selection node has one action-selection child per clustered goal.

mod tree;

use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{sample_goal_candidates, ActionModel, ActionTemplate, GoalCandidate, GoalSampling};
use crate::error::PlanError;
use crate::feasibility::{generate_trajectory, state_feasible, trajectory_feasible, SceneSpec};
use crate::geometry::{Pose, PoseDistanceParams};
use crate::intention::GoalScorer;
use crate::sampling::{derive_seed, rng_from_seed, SeededRng};
use crate::scalar::{max_of, Real};
use crate::state::WorldState;

pub use tree::{NodeId, NodeKind, SearchNode, SearchTree};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_SAMPLES: usize = 20;
pub const DEFAULT_WAYPOINTS: usize = 32;
/// Action cost and base temperature as fractions of a reference likelihood.
pub const DEFAULT_COST_FRACTION: f64 = 0.05;
pub const DEFAULT_TAU_FRACTION: f64 = 0.05;

const SEED_STREAM_GOALS: u64 = 0x676f_616c;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig<T: Real> {
    pub iterations: usize,
    /// Goal samples drawn per goal-selection node.
    pub samples: usize,
    pub action_cost: T,
    pub tau0: T,
    pub cluster_cutoff: T,
    pub max_depth: usize,
    pub waypoints: usize,
    /// Perturb goal samples with kernel noise.
    pub noise: bool,
    pub bandwidth: PoseDistanceParams<T>,
    pub seed: u64,
}

impl<T: Real> PlannerConfig<T> {
    /// Defaults scaled to `psi_ref`, typically the likelihood of a
    /// demonstrated final state, with depth twice the number of movable
    /// objects.
    pub fn defaults_for(psi_ref: T, movable: usize, bandwidth: PoseDistanceParams<T>) -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            samples: DEFAULT_SAMPLES,
            action_cost: psi_ref * T::of(DEFAULT_COST_FRACTION),
            tau0: psi_ref * T::of(DEFAULT_TAU_FRACTION),
            cluster_cutoff: bandwidth.sigma_t * T::of(3.0),
            max_depth: 2 * movable,
            waypoints: DEFAULT_WAYPOINTS,
            noise: true,
            bandwidth,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.samples == 0 {
            return Err(PlanError::InvalidConfig("samples must be positive"));
        }
        if self.waypoints < 4 {
            return Err(PlanError::InvalidConfig("waypoints must be at least 4"));
        }
        if !(self.tau0.is_finite() && self.tau0 > T::zero()) {
            return Err(PlanError::InvalidConfig("tau0 must be positive"));
        }
        if !(self.action_cost.is_finite() && self.action_cost >= T::zero()) {
            return Err(PlanError::InvalidConfig("action cost must be non-negative"));
        }
        if !(self.cluster_cutoff.is_finite() && self.cluster_cutoff >= T::zero()) {
            return Err(PlanError::InvalidConfig("cluster cutoff must be non-negative"));
        }
        Ok(())
    }

    pub fn goal_sampling(&self) -> GoalSampling<T> {
        GoalSampling {
            samples: self.samples,
            cluster_cutoff: self.cluster_cutoff,
            metric: self.bandwidth,
            noise: self.noise,
        }
    }
}

/// Source of goal candidates for a goal-selection node.
pub trait GoalGenerator<T: Real> {
    fn candidates(
        &self,
        action: &ActionModel<T>,
        template: &ActionTemplate<T>,
        state: &WorldState<T>,
        seed: u64,
    ) -> Result<Vec<GoalCandidate<T>>, PlanError>;
}

/// Samples goals from the template and clusters them.
#[derive(Clone, Debug)]
pub struct SampledGoals<T: Real>(pub GoalSampling<T>);

impl<T: Real> GoalGenerator<T> for SampledGoals<T> {
    fn candidates(
        &self,
        action: &ActionModel<T>,
        template: &ActionTemplate<T>,
        state: &WorldState<T>,
        seed: u64,
    ) -> Result<Vec<GoalCandidate<T>>, PlanError> {
        Ok(sample_goal_candidates(action, template, state, &self.0, seed)?)
    }
}

/// One step of a plan under validation.
#[derive(Clone, Copy, Debug)]
pub struct StepSpec<'a, T: Real> {
    pub action: &'a ActionModel<T>,
    pub template: &'a ActionTemplate<T>,
    pub goal_state: &'a WorldState<T>,
}

/// Validates a whole plan; returns one trajectory per step or the index of
/// the first failing step.
pub trait PlanChecker<T: Real> {
    fn check(&self, start: &WorldState<T>, steps: &[StepSpec<'_, T>]) -> Result<Vec<Vec<Pose<T>>>, usize>;
}

/// Checks each step's lift-carry-place trajectory against the scene.
#[derive(Clone, Copy, Debug)]
pub struct GeometricChecker<'a, T: Real> {
    pub scene: &'a SceneSpec<T>,
    pub waypoints: usize,
}

impl<T: Real> PlanChecker<T> for GeometricChecker<'_, T> {
    fn check(&self, start: &WorldState<T>, steps: &[StepSpec<'_, T>]) -> Result<Vec<Vec<Pose<T>>>, usize> {
        check_feasibility(self.scene, start, steps, self.waypoints)
    }
}

/// Generates and checks every step's trajectory in order.
pub fn check_feasibility<T: Real>(
    scene: &SceneSpec<T>,
    start: &WorldState<T>,
    steps: &[StepSpec<'_, T>],
    waypoints: usize,
) -> Result<Vec<Vec<Pose<T>>>, usize> {
    let mut state = start;
    let mut out = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        let object = step.action.object_id.as_ref().ok_or(i)?;
        let goal = step.goal_state.pose(object).ok_or(i)?;
        let traj = generate_trajectory(scene, state, object, goal, waypoints).map_err(|_| i)?;
        if !trajectory_feasible(scene, state, &traj).is_feasible() {
            return Err(i);
        }
        out.push(traj.waypoints);
        state = step.goal_state;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PlanStep<T: Real> {
    pub action: String,
    pub template: String,
    pub goal_state: WorldState<T>,
    pub trajectory: Vec<Pose<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Plan<T: Real> {
    pub steps: Vec<PlanStep<T>>,
    /// Likelihood of the final state minus the accumulated action cost.
    pub value: T,
    pub final_state: WorldState<T>,
    pub iterations_used: usize,
}

/// Greedy path through the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanPath {
    /// Action-selection node reached after each step.
    pub steps: Vec<NodeId>,
    /// Node the path ends at: a no-op child or an unexpanded leaf.
    pub leaf: NodeId,
}

/// Picks an index with probability proportional to `exp(v / tau)`.
pub fn boltzmann_pick<T: Real, R: Rng + ?Sized>(values: &[T], tau: T, rng: &mut R) -> usize {
    let peak = values.iter().copied().fold(T::neg_infinity(), max_of);
    let weights: Vec<f64> = if peak.is_finite() {
        values.iter().map(|&v| ((v - peak) / tau).as_f64().exp()).collect()
    } else {
        vec![1.0; values.len()]
    };
    weighted_pick(&weights, rng)
}

fn weighted_pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.random_range(0..weights.len());
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Temperature at a node visited `visits` times.
pub fn temperature<T: Real>(tau0: T, visits: u64) -> T {
    tau0 / T::of((E + visits as f64).ln())
}

pub struct Planner<'a, T: Real> {
    scorer: &'a dyn GoalScorer<T>,
    actions: &'a [ActionModel<T>],
    scene: &'a SceneSpec<T>,
    goals: Box<dyn GoalGenerator<T> + 'a>,
    checker: Box<dyn PlanChecker<T> + 'a>,
    config: PlannerConfig<T>,
    tree: SearchTree<T>,
    rng: SeededRng,
    iterations_used: usize,
    demotions: usize,
}

impl<'a, T: Real> Planner<'a, T> {
    /// Creates a planner rooted at `start`, which must be feasible.
    pub fn new(
        scorer: &'a dyn GoalScorer<T>,
        actions: &'a [ActionModel<T>],
        scene: &'a SceneSpec<T>,
        start: WorldState<T>,
        config: PlannerConfig<T>,
    ) -> Result<Self, PlanError> {
        config.validate()?;
        scene.validate()?;
        scene.check_state(&start)?;
        if !state_feasible(scene, &start) {
            return Err(PlanError::InfeasibleStart);
        }
        let psi = scorer.score(&start)?;
        Ok(Self {
            scorer,
            actions,
            scene,
            goals: Box::new(SampledGoals(config.goal_sampling())),
            checker: Box::new(GeometricChecker {
                scene,
                waypoints: config.waypoints,
            }),
            config,
            tree: SearchTree::new(start, psi),
            rng: rng_from_seed(config.seed),
            iterations_used: 0,
            demotions: 0,
        })
    }

    pub fn with_goal_generator(mut self, goals: impl GoalGenerator<T> + 'a) -> Self {
        self.goals = Box::new(goals);
        self
    }

    pub fn with_checker(mut self, checker: impl PlanChecker<T> + 'a) -> Self {
        self.checker = Box::new(checker);
        self
    }

    pub fn tree(&self) -> &SearchTree<T> {
        &self.tree
    }

    pub fn config(&self) -> &PlannerConfig<T> {
        &self.config
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    /// Leaves demoted by the repair loop so far.
    pub fn demotions(&self) -> usize {
        self.demotions
    }

    /// Descends from the root to an unexpanded leaf, counting visits.
    pub fn select_leaf(&mut self) -> Option<NodeId> {
        let mut cur = SearchTree::<T>::ROOT;
        loop {
            let node = self.tree.node(cur);
            if node.solved {
                return None;
            }
            if node.is_leaf() {
                self.tree.node_mut(cur).visits += 1;
                return Some(cur);
            }
            let open: Vec<NodeId> = node.children.iter().copied().filter(|&c| !self.tree.node(c).solved).collect();
            if open.is_empty() {
                return None;
            }
            let pick = match node.kind {
                NodeKind::GoalSelection { .. } => {
                    let w: Vec<f64> = open.iter().map(|&c| self.tree.node(c).goal_probability.as_f64()).collect();
                    weighted_pick(&w, &mut self.rng)
                }
                _ => {
                    let tau = temperature(self.config.tau0, node.visits);
                    let v: Vec<T> = open.iter().map(|&c| self.tree.node(c).value).collect();
                    boltzmann_pick(&v, tau, &mut self.rng)
                }
            };
            self.tree.node_mut(cur).visits += 1;
            cur = open[pick];
        }
    }

    /// Expands a leaf, or demotes it if its state turns out infeasible.
    pub fn expand_node(&mut self, leaf: NodeId) -> Result<(), PlanError> {
        let node = self.tree.node(leaf);
        if !node.is_leaf() || node.demoted {
            return Ok(());
        }
        let state = node.state.clone().expect("action-selection node has a state");
        let (depth, psi) = (node.depth, node.psi);
        if leaf != SearchTree::<T>::ROOT && !state_feasible(self.scene, &state) {
            self.tree.node_mut(leaf).demoted = true;
            self.tree.update_values(leaf, self.config.action_cost);
            return Ok(());
        }
        if depth < self.config.max_depth {
            for (ai, action) in self.actions.iter().enumerate() {
                if action.is_noop {
                    continue;
                }
                let t_node = self.tree.add_child(leaf, NodeKind::TemplateSelection { action: ai }, depth);
                for (ti, template) in action.templates.iter().enumerate() {
                    let g_node = self
                        .tree
                        .add_child(t_node, NodeKind::GoalSelection { action: ai, template: ti }, depth);
                    let seed = derive_seed(self.config.seed ^ SEED_STREAM_GOALS, g_node.0 as u64);
                    for cand in self.goals.candidates(action, template, &state, seed)? {
                        let psi = self.scorer.score(&cand.state)?;
                        let c = self.tree.add_child(g_node, NodeKind::ActionSelection, depth + 1);
                        let n = self.tree.node_mut(c);
                        n.state = Some(cand.state);
                        n.psi = psi;
                        n.value = psi;
                        n.goal_probability = cand.probability;
                    }
                    self.refresh(g_node);
                }
                self.refresh(t_node);
            }
        }
        let noop = self.tree.add_child(leaf, NodeKind::ActionSelection, depth);
        let n = self.tree.node_mut(noop);
        n.state = Some(state);
        n.psi = psi;
        n.value = psi;
        n.terminal = true;
        n.solved = true;
        self.tree.node_mut(leaf).expanded = true;
        self.tree.update_values(leaf, self.config.action_cost);
        Ok(())
    }

    fn refresh(&mut self, id: NodeId) {
        let (v, s) = self.tree.backup(id, self.config.action_cost);
        let n = self.tree.node_mut(id);
        n.value = v;
        n.solved = s;
    }

    /// Recomputes values from `from` up to the root.
    pub fn update_values(&mut self, from: NodeId) {
        self.tree.update_values(from, self.config.action_cost);
    }

    /// One select-expand-backup round; `false` once the root is solved.
    pub fn iterate(&mut self) -> Result<bool, PlanError> {
        match self.select_leaf() {
            Some(leaf) => {
                self.expand_node(leaf)?;
                self.iterations_used += 1;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Runs up to `n` iterations, stopping early when the root is solved.
    pub fn run(&mut self, n: usize) -> Result<usize, PlanError> {
        let mut done = 0;
        while done < n && self.iterate()? {
            done += 1;
        }
        Ok(done)
    }

    /// Follows the best child at every layer from the root.
    pub fn recommend_best_plan(&self) -> Result<PlanPath, PlanError> {
        let root = self.tree.root();
        if !root.expanded {
            return Err(PlanError::RootUnexpanded);
        }
        if root.value == T::neg_infinity() {
            return Err(PlanError::NoFeasiblePlan);
        }
        let mut cur = SearchTree::<T>::ROOT;
        let mut steps = Vec::new();
        loop {
            let n = self.tree.node(cur);
            if n.terminal || n.demoted || !n.expanded {
                return Ok(PlanPath { steps, leaf: cur });
            }
            let Some(c) = self.tree.best_child(cur) else {
                return Ok(PlanPath { steps, leaf: cur });
            };
            if self.tree.node(c).kind == NodeKind::ActionSelection {
                return Ok(PlanPath { steps, leaf: c });
            }
            let next = self
                .tree
                .best_child(c)
                .and_then(|g| self.tree.best_child(g))
                .ok_or(PlanError::NoFeasiblePlan)?;
            steps.push(next);
            cur = next;
        }
    }

    fn step_specs(&self, path: &PlanPath) -> Vec<StepSpec<'_, T>> {
        path.steps
            .iter()
            .map(|&s| {
                let g = self.tree.node(s).parent.expect("step node has a parent");
                let NodeKind::GoalSelection { action, template } = self.tree.node(g).kind else {
                    unreachable!("step nodes hang off goal-selection nodes")
                };
                let a = &self.actions[action];
                StepSpec {
                    action: a,
                    template: &a.templates[template],
                    goal_state: self.tree.node(s).state.as_ref().expect("state"),
                }
            })
            .collect()
    }

    fn leaf_state(&self, path: &PlanPath) -> (&WorldState<T>, T) {
        let n = self.tree.node(path.leaf);
        (n.state.as_ref().expect("action-selection node has a state"), n.psi)
    }

    /// Marks a leaf infeasible and propagates the change.
    pub fn demote(&mut self, leaf: NodeId) {
        self.tree.node_mut(leaf).demoted = true;
        self.demotions += 1;
        self.update_values(leaf);
    }

    /// Recommends plans until one passes the checker, demoting the terminal
    /// leaf of each rejected plan.
    pub fn repair(&mut self) -> Result<Plan<T>, PlanError> {
        loop {
            let path = self.recommend_best_plan()?;
            let specs = self.step_specs(&path);
            let start = self.tree.root().state.as_ref().expect("root state");
            match self.checker.check(start, &specs) {
                Ok(trajectories) => {
                    let steps = specs
                        .iter()
                        .zip(trajectories)
                        .map(|(s, trajectory)| PlanStep {
                            action: s.action.action_id.clone(),
                            template: s.template.template_id(),
                            goal_state: s.goal_state.clone(),
                            trajectory,
                        })
                        .collect::<Vec<_>>();
                    let (final_state, psi) = self.leaf_state(&path);
                    let cost = self.config.action_cost * T::of(steps.len() as f64);
                    return Ok(Plan {
                        value: psi - cost,
                        final_state: final_state.clone(),
                        steps,
                        iterations_used: self.iterations_used,
                    });
                }
                Err(_) => self.demote(path.leaf),
            }
        }
    }

    /// Runs the configured number of iterations, then repairs.
    pub fn solve(&mut self) -> Result<Plan<T>, PlanError> {
        self.run(self.config.iterations)?;
        self.repair()
    }
}

/// Plans with the default goal sampler and geometric checker.
pub fn solve_task<T: Real>(
    scorer: &dyn GoalScorer<T>,
    actions: &[ActionModel<T>],
    scene: &SceneSpec<T>,
    start: &WorldState<T>,
    config: PlannerConfig<T>,
) -> Result<Plan<T>, PlanError> {
    Planner::new(scorer, actions, scene, start.clone(), config)?.solve()
}
