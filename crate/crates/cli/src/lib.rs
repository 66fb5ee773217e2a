//! Command-line pipeline: learn a model from demonstrations, plan from a
//! scene, run randomized trials, and render scenes or plans as SVG.

pub mod config;
pub mod render;
pub mod trials;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use improvise::demonstrations::{build_task_demo_set, load_demo_source, SegmentationParams, SegmentedDemo};
use improvise::feasibility::SceneSpec;
use improvise::intention::{compute_weights, IntentionConfig};
use improvise::model::LearnedModel;
use improvise::oracle::{enumerate_optimal, CandidateTable, DiscretizedProblem};
use improvise::planner::{solve_task, Plan};
use improvise::state::WorldState;
use improvise::PlanError;

pub use config::PlanFlags;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_PLAN: i32 = 2;
pub const EXIT_INFEASIBLE_START: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "improvise",
    version,
    about = "Learn goal likelihoods from demonstrations and plan toward them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn a model from demonstration files
    Learn {
        #[arg(required = true)]
        demos: Vec<PathBuf>,
        /// Check demonstrated objects against this scene
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Plan from a start state
    Plan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// State file, or a plan file whose final state is used
        #[arg(long)]
        start: PathBuf,
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Plan from many random start states and classify the results
    Trials {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Use this start for every trial instead of sampling
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: PlanFlags,
    },
    /// Draw a state or plan as SVG
    Render {
        #[arg(long)]
        scene: PathBuf,
        /// State file or plan file
        input: PathBuf,
        #[arg(long, default_value = "render.svg")]
        out: PathBuf,
    },
    /// Exhaustive search over demonstrated goals, for debugging
    #[command(hide = true)]
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        start: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: PlanFlags,
    },
}

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.chain().find_map(|e| e.downcast_ref::<PlanError>()) {
        Some(PlanError::NoFeasiblePlan) => EXIT_NO_PLAN,
        Some(PlanError::InfeasibleStart) => EXIT_INFEASIBLE_START,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Learn {
            demos,
            scene,
            out: path,
            flags,
        } => {
            let model = learn(&demos, scene.as_deref(), &flags.resolve()?)?;
            model.save(&path).with_context(|| format!("writing {}", path.display()))?;
            print_weights(&model, out)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Plan {
            model,
            scene,
            start,
            out: path,
            flags,
        } => {
            let model = load_model(&model)?;
            let scene = load_scene(&scene)?;
            let start = load_state(&start)?;
            let cfg = flags.resolve()?.planner_config(&model)?;
            let plan = solve_task(&model.intention, &model.actions, &scene, &start, cfg)?;
            write_plan(&plan, &path)?;
            writeln!(out, "value {}", plan.value)?;
            writeln!(out, "steps {}", plan.steps.len())?;
            for (i, s) in plan.steps.iter().enumerate() {
                writeln!(out, "  {} {} {}", i + 1, s.action, s.template)?;
            }
            writeln!(out, "iterations {}", plan.iterations_used)?;
        }
        Command::Trials {
            model,
            scene,
            n,
            start,
            out: path,
            flags,
        } => {
            let model = load_model(&model)?;
            let scene = load_scene(&scene)?;
            let start = start.as_deref().map(load_state).transpose()?;
            let cfg = flags.resolve()?.planner_config(&model)?;
            let report = trials::run_trials(&model, &scene, n, cfg, start.as_ref())?;
            writeln!(
                out,
                "trials {} full {} partial {} failures {}",
                report.trials, report.full_successes, report.partial_solutions, report.failures
            )?;
            let json = serde_json::to_string_pretty(&report)?;
            match path {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => writeln!(out, "{json}")?,
            }
        }
        Command::Render { scene, input, out: path } => {
            let scene = load_scene(&scene)?;
            let svg = match load_drawable(&input)? {
                Drawable::Plan(p) => render::render_plan(&scene, &p),
                Drawable::State(s) => render::render_state(&scene, &s),
            };
            std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Oracle {
            model,
            scene,
            start,
            out: path,
            flags,
        } => {
            let model = load_model(&model)?;
            let scene = load_scene(&scene)?;
            let start = load_state(&start)?;
            let flags = flags.resolve()?;
            let cfg = flags.planner_config(&model)?;
            let candidates = demo_candidates(&model, flags.samples.unwrap_or(3));
            let result = enumerate_optimal(&DiscretizedProblem {
                scorer: &model.intention,
                actions: &model.actions,
                candidates: &candidates,
                scene: &scene,
                start,
                horizon: flags.max_depth.unwrap_or(2),
                action_cost: cfg.action_cost,
                waypoints: cfg.waypoints,
            })?;
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "value": result.value,
                "steps": result.steps.iter().map(|s| serde_json::json!({
                    "action": s.action,
                    "template": s.template,
                    "goal_state": s.goal_state,
                })).collect::<Vec<_>>(),
                "final_state": result.final_state,
                "plans_scored": result.plans_scored,
            }))?;
            match path {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => writeln!(out, "{json}")?,
            }
        }
    }
    Ok(())
}

/// Learns a model from demonstration files of either form.
pub fn learn(paths: &[PathBuf], scene: Option<&Path>, flags: &PlanFlags) -> Result<LearnedModel<f64>> {
    if paths.is_empty() {
        bail!("at least one demonstration file is required");
    }
    let seg = SegmentationParams::default();
    let demos = paths
        .iter()
        .map(|p| {
            let source = load_demo_source(p)?;
            SegmentedDemo::from_source(source, &seg).with_context(|| format!("segmenting {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = build_task_demo_set(demos)?;
    if let Some(path) = scene {
        let scene = load_scene(path)?;
        for (i, s) in set.final_states().enumerate() {
            scene
                .check_state(s)
                .with_context(|| format!("demonstration {} does not match scene {}", paths[i].display(), path.display()))?;
        }
    }
    let defaults = IntentionConfig::default();
    let config = IntentionConfig {
        bandwidth: flags.bandwidth(defaults.bandwidth)?,
        seed: flags.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    Ok(LearnedModel::learn(&set, &config)?)
}

/// Prints the entropy and weight of every relation.
pub fn print_weights(model: &LearnedModel<f64>, out: &mut dyn Write) -> Result<()> {
    let entropies: BTreeMap<_, _> = model
        .intention
        .relations
        .iter()
        .map(|r| ((r.object.clone(), r.reference.clone()), r.entropy))
        .collect();
    let w = compute_weights(&entropies)?;
    writeln!(out, "{:<12} {:<12} {:>12} {:>12}", "object", "reference", "entropy", "weight")?;
    for r in &model.intention.relations {
        let omega = w.omega[&(r.object.clone(), r.reference.clone())];
        writeln!(
            out,
            "{:<12} {:<12} {:>12.4} {:>12.4}",
            r.object.as_str(),
            r.reference.as_str(),
            r.entropy,
            omega
        )?;
    }
    writeln!(out, "eta {:.6}", w.eta)?;
    Ok(())
}

/// The first `n` demonstrated relative goals of every template.
pub fn demo_candidates(model: &LearnedModel<f64>, n: usize) -> CandidateTable<f64> {
    let mut table = CandidateTable::new();
    for a in model.actions.iter().filter(|a| !a.is_noop) {
        for t in &a.templates {
            let k = n.min(t.samples.len());
            table.insert((a.action_id.clone(), t.template_id()), t.samples[..k].to_vec());
        }
    }
    table
}

pub fn load_model(path: &Path) -> Result<LearnedModel<f64>> {
    Ok(LearnedModel::load(path)?)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scene {}", path.display()))?;
    let scene: SceneSpec<f64> = serde_json::from_str(&text).with_context(|| format!("parsing scene {}", path.display()))?;
    scene.validate().with_context(|| format!("scene {}", path.display()))?;
    Ok(scene)
}

pub enum Drawable {
    Plan(Plan<f64>),
    State(WorldState<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StateFile {
    Plan(Plan<f64>),
    Wrapped { poses: WorldState<f64> },
    Bare(WorldState<f64>),
}

pub fn load_drawable(path: &Path) -> Result<Drawable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: StateFile = serde_json::from_str(&text).with_context(|| format!("{} is neither a state nor a plan", path.display()))?;
    Ok(match file {
        StateFile::Plan(p) => Drawable::Plan(p),
        StateFile::Wrapped { poses } | StateFile::Bare(poses) => Drawable::State(poses),
    })
}

/// A state file: a map from object id to pose, optionally under `"poses"`,
/// or a plan file, in which case its final state.
pub fn load_state(path: &Path) -> Result<WorldState<f64>> {
    Ok(match load_drawable(path)? {
        Drawable::Plan(p) => p.final_state,
        Drawable::State(s) => s,
    })
}

pub fn write_plan(plan: &Plan<f64>, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(plan)?;
    json.push('\n');
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}
