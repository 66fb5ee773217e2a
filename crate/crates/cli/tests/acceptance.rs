//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use improvise::actions::ActionModel;
use improvise::feasibility::{boxes_overlap, SceneObject};
use improvise::geometry::{relative_pose, Pose, PoseDistanceParams};
use improvise::intention::{compute_weights, estimate_entropy, kernel_density, single_kernel_entropy, RelationModel};
use improvise::model::LearnedModel;
use improvise::oracle::{enumerate_optimal, inject_candidates, CandidateTable, DiscretizedProblem};
use improvise::planner::{check_feasibility, GeometricChecker, NodeKind, PlanChecker, PlanPath, Planner, PlannerConfig, StepSpec};
use improvise::sampling::rng_from_seed;
use improvise::state::{ObjectId, WorldState};
use improvise::tasks::{random_start_state, MAX_START_ATTEMPTS};
use improvise::PlanError;
use improvise_cli::{exit_code, learn, load_scene, load_state, PlanFlags};

type Verdict = Result<String, String>;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn bundled_model(task: &str) -> LearnedModel<f64> {
    let demos: Vec<PathBuf> = (1..=5).map(|i| data(&format!("{task}/demo_{i}.json"))).collect();
    learn(&demos, Some(&data(&format!("{task}/scene.json"))), &PlanFlags::default()).unwrap()
}

fn defaults(m: &LearnedModel<f64>) -> PlannerConfig<f64> {
    PlanFlags::default().planner_config(m).unwrap()
}

fn check(cond: bool, ok: String, fail: String) -> Verdict {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn oracle_equivalence() -> Verdict {
    let m = bundled_model("lid_box");
    let scene = load_scene(&data("lid_box/scene.json")).unwrap();
    let mut cfg = defaults(&m);
    cfg.iterations = 2000;
    cfg.max_depth = 2;
    let clock = Instant::now();
    let mut rng = rng_from_seed(2024);
    let (mut equal, mut above) = (0, 0);
    for i in 0..100u64 {
        let mut table = CandidateTable::new();
        for a in m.actions.iter().filter(|a| !a.is_noop) {
            for t in a.templates.iter().take(3) {
                let k = rng.random_range(1..=3.min(t.samples.len()));
                let picks = sample(&mut rng, t.samples.len(), k);
                table.insert((a.action_id.clone(), t.template_id()), picks.iter().map(|j| t.samples[j]).collect());
            }
        }
        let s0 = random_start_state(&scene, &mut rng, MAX_START_ATTEMPTS).unwrap();
        let oracle = enumerate_optimal(&DiscretizedProblem {
            scorer: &m.intention,
            actions: &m.actions,
            candidates: &table,
            scene: &scene,
            start: s0.clone(),
            horizon: 2,
            action_cost: cfg.action_cost,
            waypoints: cfg.waypoints,
        })
        .unwrap();
        cfg.seed = i;
        let plan = Planner::new(&m.intention, &m.actions, &scene, s0, cfg)
            .unwrap()
            .with_goal_generator(inject_candidates(&m.actions, table).unwrap())
            .solve()
            .unwrap();
        if (plan.value - oracle.value).abs() <= 1e-9 {
            equal += 1;
        }
        if plan.value > oracle.value + 1e-9 {
            above += 1;
        }
    }
    let t = clock.elapsed();
    let msg = format!(
        "{equal}/100 equal to the oracle within 1e-9, {above} above it, {:.1}s",
        t.as_secs_f64()
    );
    check(equal >= 95 && above == 0 && t < Duration::from_secs(60), msg.clone(), msg)
}

fn lid_box_trials() -> Verdict {
    let m = bundled_model("lid_box");
    let scene = load_scene(&data("lid_box/scene.json")).unwrap();
    let clock = Instant::now();
    let r = improvise_cli::trials::run_trials(&m, &scene, 50, defaults(&m), None).map_err(|e| e.to_string())?;
    let t = clock.elapsed();
    let msg = format!(
        "{} full, {} partial, {} failures of {} in {:.1}s",
        r.full_successes,
        r.partial_solutions,
        r.failures,
        r.trials,
        t.as_secs_f64()
    );
    let sums = r.full_successes + r.partial_solutions + r.failures == 50;
    check(r.full_successes >= 40 && sums && t < Duration::from_secs(300), msg.clone(), msg)
}

fn partial_solution() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    bundled_model("tidy").save(&model).unwrap();
    let plan_path = dir.path().join("plan.json");
    let mut args: Vec<std::ffi::OsString> = ["improvise", "plan", "--model"].iter().map(Into::into).collect();
    args.push(model.into());
    args.push("--scene".into());
    args.push(data("tidy/caged_scene.json").into());
    args.push("--start".into());
    args.push(data("tidy/caged_start.json").into());
    args.push("--out".into());
    args.push(plan_path.clone().into());
    args.push("--no-noise".into());
    let code = improvise_cli::run(args, &mut std::io::sink(), &mut std::io::sink());
    if code != 0 {
        return Err(format!("exit {code}"));
    }
    let plan: improvise::Plan = serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    let steps: Vec<_> = plan.steps.iter().map(|s| format!("{} {}", s.action, s.template)).collect();
    let msg = format!("exit 0, steps {steps:?}");
    check(steps.len() == 1 && plan.steps[0].action == "move:cube", msg.clone(), msg)
}

fn relation(samples: Vec<Pose<f64>>, object: &str) -> RelationModel<f64> {
    RelationModel {
        object: ObjectId::new(object),
        reference: ObjectId::new("base"),
        samples,
        bandwidth: PoseDistanceParams::default(),
        entropy: 0.0,
        weight: 1.0,
    }
}

fn noisy_samples<R: Rng>(rng: &mut R, n: usize, noise: f64) -> Vec<Pose<f64>> {
    (0..n)
        .map(|_| {
            let mut g = || 0.1 + noise * rng.sample::<f64, _>(StandardNormal);
            Pose::from_yaw([g(), g(), g()], 0.3)
        })
        .collect()
}

fn entropy_ordering() -> Verdict {
    let mut wins = 0;
    for seed in 0..100u64 {
        let mut rng = rng_from_seed(seed);
        let tight = relation(noisy_samples(&mut rng, 5, 0.005), "tight");
        let loose = relation(noisy_samples(&mut rng, 5, 0.2), "loose");
        let mut h = BTreeMap::new();
        for (i, r) in [&tight, &loose].into_iter().enumerate() {
            let e = estimate_entropy(r, 1000, seed * 2 + i as u64).unwrap();
            h.insert((r.object.clone(), r.reference.clone()), e.nats);
        }
        let w = compute_weights(&h).unwrap();
        let key = |r: &RelationModel<f64>| (r.object.clone(), r.reference.clone());
        if w.omega[&key(&tight)] > w.omega[&key(&loose)] {
            wins += 1;
        }
    }
    let msg = format!("tighter relation weighted higher in {wins}/100 seeds");
    check(wins == 100, msg.clone(), msg)
}

fn random_rotation<R: Rng>(rng: &mut R) -> [f64; 4] {
    let mut n = || rng.sample::<f64, _>(StandardNormal);
    [n(), n(), n(), n()]
}

fn random_pose<R: Rng>(rng: &mut R, half_width: f64) -> Pose<f64> {
    let t = [
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
    ];
    Pose::new(t, random_rotation(rng)).unwrap()
}

fn kde_sanity() -> Verdict {
    let mut rng = rng_from_seed(55);
    let mut bad = 0;
    for _ in 0..1000 {
        let bw = PoseDistanceParams::new(rng.random_range(0.005..0.05), rng.random_range(0.05..0.3)).unwrap();
        let n = rng.random_range(1..=10);
        let mut r = relation((0..n).map(|_| random_pose(&mut rng, 0.3)).collect(), "o");
        r.bandwidth = bw;
        let far = loop {
            let q = random_pose(&mut rng, 1.5);
            if r.samples.iter().all(|s| improvise::geometry::pose_distance(s, &q, &bw) >= 5.0) {
                break q;
            }
        };
        let floor = kernel_density(&r, &far);
        if r.samples.iter().any(|s| kernel_density(&r, s) < floor) {
            bad += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for (i, (st, sr)) in [(0.02, 0.1), (0.01, 0.05), (0.05, 0.2)].into_iter().enumerate() {
        let mut r = relation(vec![Pose::from_yaw([0.1, 0.0, 0.0], 0.4)], "o");
        r.bandwidth = PoseDistanceParams::new(st, sr).unwrap();
        let e = estimate_entropy(&r, 10_000, 900 + i as u64).unwrap();
        let exact = single_kernel_entropy(&r.bandwidth);
        worst = worst.max((e.nats - exact).abs() / e.std_error);
    }
    let msg = format!("{bad}/1000 models with a far point denser than a sample; single-mode entropy within {worst:.2} SE");
    check(bad == 0 && worst <= 3.0, msg.clone(), msg)
}

fn tree_audit() -> Verdict {
    let m = bundled_model("tidy");
    let scene = load_scene(&data("tidy/scene.json")).unwrap();
    let s0 = random_start_state(&scene, &mut rng_from_seed(77), MAX_START_ATTEMPTS).unwrap();
    let cfg = defaults(&m);
    let mut p = Planner::new(&m.intention, &m.actions, &scene, s0, cfg).unwrap();
    for i in 0..500 {
        if !p.iterate().unwrap() {
            return Err(format!("root solved after {i} iterations"));
        }
        if let Some(node) = p.tree().audit(cfg.action_cost) {
            return Err(format!("node {node:?} disagrees with its children after iteration {}", i + 1));
        }
    }
    Ok(format!(
        "500 iterations, {} nodes, every internal value matches its children",
        p.tree().len()
    ))
}

fn step_specs<'a>(p: &'a Planner<'_, f64>, actions: &'a [ActionModel<f64>], path: &PlanPath) -> Vec<StepSpec<'a, f64>> {
    path.steps
        .iter()
        .map(|&s| {
            let g = p.tree().node(s).parent.unwrap();
            let NodeKind::GoalSelection { action, template } = p.tree().node(g).kind else {
                unreachable!()
            };
            StepSpec {
                action: &actions[action],
                template: &actions[action].templates[template],
                goal_state: p.tree().node(s).state.as_ref().unwrap(),
            }
        })
        .collect()
}

struct BlockAll;

impl PlanChecker<f64> for BlockAll {
    fn check(&self, _: &WorldState<f64>, _: &[StepSpec<'_, f64>]) -> Result<Vec<Vec<Pose<f64>>>, usize> {
        Err(0)
    }
}

fn repair_contract() -> Verdict {
    let m = bundled_model("lid_box");
    let scene = load_scene(&data("lid_box/scene.json")).unwrap();
    let s0 = load_state(&data("lid_box/start.json")).unwrap();
    let cfg = defaults(&m);
    let mut p = Planner::new(&m.intention, &m.actions, &scene, s0.clone(), cfg).unwrap();
    p.run(cfg.iterations).unwrap();
    let best = p.recommend_best_plan().unwrap();
    let specs = step_specs(&p, &m.actions, &best);
    if specs.is_empty() {
        return Err("best plan has no steps to block".into());
    }
    let trajectories = check_feasibility(&scene, &s0, &specs, cfg.waypoints).map_err(|i| format!("best plan already fails at step {i}"))?;
    let apex = trajectories[0][trajectories[0].len() / 2];
    let mut blocked = scene.clone();
    blocked.objects.push(SceneObject {
        id: ObjectId::new("blocker"),
        half_extents: [0.01, 0.01, 0.01],
        pose: Some(Pose::from_translation(
            apex.translation()[0],
            apex.translation()[1],
            apex.translation()[2],
        )),
    });
    let flipped = GeometricChecker {
        scene: &blocked,
        waypoints: cfg.waypoints,
    }
    .check(&s0, &specs)
    .is_err();
    drop(specs);
    let demoted = |p: &Planner<'_, f64>| p.tree().ids().filter(|&i| p.tree().node(i).demoted).count();
    let before = demoted(&p);
    p.demote(best.leaf);
    let one = demoted(&p) == before + 1 && p.tree().node(best.leaf).value == f64::NEG_INFINITY;
    let next = p.recommend_best_plan().unwrap();

    let mut cfg_blocked = cfg;
    cfg_blocked.iterations = 200;
    let stuck = Planner::new(&m.intention, &m.actions, &scene, s0, cfg_blocked)
        .unwrap()
        .with_checker(BlockAll)
        .solve();
    let code = match &stuck {
        Err(e) => exit_code(&anyhow::Error::new(e.clone())),
        Ok(_) => 0,
    };
    let msg = format!(
        "blocker flips feasibility: {flipped}, one leaf demoted: {one}, new leaf differs: {}, fully blocked: {:?} exit {code}",
        next.leaf != best.leaf,
        stuck.as_ref().err()
    );
    check(
        flipped && one && next.leaf != best.leaf && stuck == Err(PlanError::NoFeasiblePlan) && code == 2,
        msg.clone(),
        msg,
    )
}

fn noop_and_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let m = bundled_model("lid_box");
    let model = dir.path().join("model.json");
    m.save(&model).unwrap();
    let goal = dir.path().join("goal.json");
    std::fs::write(&goal, serde_json::to_string(&m.demo_finals[0]).unwrap()).unwrap();
    let plan = |start: &Path, out: &Path, extra: &[&str]| {
        let mut args: Vec<std::ffi::OsString> = ["improvise", "plan", "--model"].iter().map(Into::into).collect();
        args.push(model.clone().into());
        args.push("--scene".into());
        args.push(data("lid_box/scene.json").into());
        args.push("--start".into());
        args.push(start.into());
        args.push("--out".into());
        args.push(out.into());
        args.extend(extra.iter().map(Into::into));
        let code = improvise_cli::run(args, &mut std::io::sink(), &mut std::io::sink());
        (code, std::fs::read(out).unwrap_or_default())
    };
    let (code, bytes) = plan(&goal, &dir.path().join("noop.json"), &["--action-cost", "1e9"]);
    let noop: improvise::Plan = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    let a = plan(&data("lid_box/start.json"), &dir.path().join("a.json"), &["--seed", "42"]);
    let b = plan(&data("lid_box/start.json"), &dir.path().join("b.json"), &["--seed", "42"]);
    let msg = format!(
        "high-cost plan from a demonstrated goal has {} steps (exit {code}); seeded runs byte-identical: {}",
        noop.steps.len(),
        a == b
    );
    check(
        code == 0 && noop.steps.is_empty() && a.0 == 0 && a == b && !a.1.is_empty(),
        msg.clone(),
        msg,
    )
}

fn pose_round_trips() -> usize {
    let mut rng = rng_from_seed(9);
    let mut bad = 0;
    for _ in 0..1000 {
        let a = random_pose(&mut rng, 1.0);
        let b = random_pose(&mut rng, 1.0);
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let ab = a.compose(&b);
        let back = a.inverse().transform_point(&a.transform_point(&p));
        let json: Pose<f64> = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        let ok = a.compose(&a.inverse()).approx_eq_rotation_invariant(&Pose::identity(), 1e-9)
            && a.inverse().compose(&ab).approx_eq_rotation_invariant(&b, 1e-9)
            && relative_pose(&a, &ab).approx_eq_rotation_invariant(&b, 1e-9)
            && back.iter().zip(&p).all(|(x, y)| (x - y).abs() <= 1e-9)
            && json.approx_eq(&a, 1e-9);
        if !ok {
            bad += 1;
        }
    }
    bad
}

/// Grid points spaced at most `step` apart covering the box, in its frame.
fn inside_any_grid_point(half: &[f64; 3], pose: &Pose<f64>, other_half: &[f64; 3], other: &Pose<f64>, step: f64) -> bool {
    let n: Vec<usize> = half.iter().map(|h| (2.0 * h / step).ceil() as usize + 1).collect();
    let axis = |k: usize, i: usize| -half[k] + 2.0 * half[k] * i as f64 / (n[k] - 1) as f64;
    let to_other = other.inverse().compose(pose);
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let q = to_other.transform_point(&[axis(0, i), axis(1, j), axis(2, k)]);
                if (0..3).all(|d| q[d].abs() <= other_half[d]) {
                    return true;
                }
            }
        }
    }
    false
}

fn sat_against_sampling() -> (usize, usize) {
    const BAND: f64 = 0.002;
    let mut rng = rng_from_seed(10);
    let (mut disagreements, mut in_band) = (0, 0);
    for _ in 0..500 {
        let ha = [
            rng.random_range(0.01..0.06),
            rng.random_range(0.01..0.06),
            rng.random_range(0.01..0.06),
        ];
        let hb = [
            rng.random_range(0.01..0.06),
            rng.random_range(0.01..0.06),
            rng.random_range(0.01..0.06),
        ];
        let pa = random_pose(&mut rng, 0.05);
        let pb = random_pose(&mut rng, 0.08);
        let grow = |h: [f64; 3], d: f64| h.map(|v| v + d);
        let grown = boxes_overlap(&grow(ha, BAND), &pa, &grow(hb, BAND), &pb);
        let shrunk = boxes_overlap(&grow(ha, -BAND), &pa, &grow(hb, -BAND), &pb);
        if grown != shrunk {
            in_band += 1;
            continue;
        }
        let sampled = inside_any_grid_point(&ha, &pa, &hb, &pb, BAND);
        if sampled != boxes_overlap(&ha, &pa, &hb, &pb) {
            disagreements += 1;
        }
    }
    (disagreements, in_band)
}

fn geometry_suite() -> Verdict {
    let bad = pose_round_trips();
    let (disagree, band) = sat_against_sampling();
    let msg = format!("{bad}/1000 pose round-trips off by more than 1e-9; SAT vs point sampling: {disagree} disagreements, {band} pairs in the contact band");
    check(bad == 0 && disagree == 0, msg.clone(), msg)
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("lid-and-box trials", lid_box_trials),
        ("partial solution", partial_solution),
        ("entropy weight ordering", entropy_ordering),
        ("kde sanity", kde_sanity),
        ("tree consistency audit", tree_audit),
        ("repair loop", repair_contract),
        ("no-op dominance and determinism", noop_and_determinism),
        ("geometry and feasibility", geometry_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
