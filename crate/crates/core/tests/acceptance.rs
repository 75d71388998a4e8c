//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! The heavyweight write-task study (criteria 5 and 8) shares demonstrations
//! and trained models through a memoized bank so the suite stays inside its
//! time budget on a small CPU.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use bcil_core::autonomy::{
    run_autonomous, run_with_source, AutonomyConfig, ReplayPredictor,
};
use bcil_core::control::{slave_ref_autonomous, ControlGains, DobJoint, ObserverChain};
use bcil_core::episode::{downsample, episode_to_string, Episode, TrainingSequence};
use bcil_core::error::Error;
use bcil_core::experiment::{run_matrix, ExperimentSpec};
use bcil_core::metrics::{metric_cycle_variance, metric_open_loop, metric_sync, metric_sync_window};
use bcil_core::plant::{env_torque, step_plant, EnvironmentModel, JointTriple, PlantParams, PlantState, WallSide};
use bcil_core::seqmodel::{
    bptt_gradients, train, window_forward, ModelConfig, ModelVariant, ModelWeights,
    SequenceModel, SupervisedWindow, Topology, TrainRegime,
};
use bcil_core::task::{TaskKind, TaskSpec};
use bcil_core::teleop::{run_demo, SimConfig};

fn report(criterion: u32, name: &str, pass: bool, details: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({name}): {verdict}: {details}");
    assert!(pass, "criterion {criterion} ({name}) failed: {details}");
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// ---------------------------------------------------------------------------
// Shared write-task study (criteria 5 and 8)
// ---------------------------------------------------------------------------

const STUDY_UNITS: usize = 24;
const STUDY_LAYERS: usize = 2;
const STUDY_WINDOW: usize = 120;
const STUDY_BATCH: usize = 12;
const STUDY_LR: f64 = 2e-3;
const TF_EPOCHS: usize = 1200;
const AR_EPOCHS: usize = 2000;

fn study_demos() -> &'static Vec<TrainingSequence> {
    static DEMOS: OnceLock<Vec<TrainingSequence>> = OnceLock::new();
    DEMOS.get_or_init(|| {
        let sim = SimConfig::default();
        let mut out = Vec::new();
        let mut seed = 100u64;
        for height in [35.0, 55.0, 75.0] {
            for _ in 0..3 {
                let task = TaskSpec::write(height);
                let op = task.operator(seed);
                let ep = run_demo(&task, &op, &sim, seed).expect("demo");
                out.push(downsample(&ep).expect("downsample"));
                seed += 1;
            }
        }
        out
    })
}

fn held_out_demo() -> &'static Episode {
    static HELD: OnceLock<Episode> = OnceLock::new();
    HELD.get_or_init(|| {
        let sim = SimConfig::default();
        let task = TaskSpec::write(55.0);
        let op = task.operator(999);
        run_demo(&task, &op, &sim, 999).expect("held-out demo")
    })
}

type BankKey = (&'static str, u64);
type BankCell = Arc<OnceLock<Arc<SequenceModel>>>;

/// Trains (or returns the cached) study model for a configuration and seed.
fn study_model(kind: &'static str, seed: u64) -> Arc<SequenceModel> {
    static BANK: OnceLock<Mutex<HashMap<BankKey, BankCell>>> = OnceLock::new();
    let bank = BANK.get_or_init(|| Mutex::new(HashMap::new()));
    let cell = {
        let mut map = bank.lock().unwrap();
        map.entry((kind, seed)).or_default().clone()
    };
    cell.get_or_init(|| {
        let (variant, ar) = match kind {
            "s2m" => (ModelVariant::S2M, false),
            "sm2sm" => (ModelVariant::Sm2Sm, false),
            "sm2sm-ar" => (ModelVariant::Sm2Sm, true),
            other => panic!("unknown study model {other}"),
        };
        let mut cfg = ModelConfig::new(variant, ar);
        cfg.lstm_layers = STUDY_LAYERS;
        cfg.units = STUDY_UNITS;
        cfg.window = STUDY_WINDOW;
        cfg.batch_size = STUDY_BATCH;
        cfg.epochs = if ar { AR_EPOCHS } else { TF_EPOCHS };
        cfg.adam.lr = STUDY_LR;
        cfg.seed = seed;
        let (model, _) = train(study_demos(), &cfg).expect("study training");
        Arc::new(model)
    })
    .clone()
}

// ---------------------------------------------------------------------------
// 1. Control fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_control_fidelity() {
    let mut sim = SimConfig::default();
    sim.start_jitter = 0.0;

    // Free motion: position synchronization after the transient.
    let free = TaskSpec::free_motion(7.0);
    let op = free.operator(1);
    let ep = run_demo(&free, &op, &sim, 1).unwrap();
    let sync = metric_sync(&ep, 0.5).unwrap();
    let worst_pos = sync
        .mean_pos_err
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);

    // Sustained contact: action-reaction on the pressing joint.
    let mut draw = TaskSpec::draw(20.0);
    draw.jitter_amplitude = 0.0;
    let op = draw.operator(2);
    let contact = run_demo(&draw, &op, &sim, 2).unwrap();
    let cs = metric_sync_window(&contact, 1.5, 2.9).unwrap();
    let force_ratio = cs.mean_force_sum[1] / cs.peak_slave_tau[1];

    let pass = worst_pos < 5e-3 && cs.peak_slave_tau[1] > 0.02 && force_ratio < 0.05;
    report(
        1,
        "control fidelity",
        pass,
        format!(
            "free-motion mean |th_m - th_s| max over joints {worst_pos:.2e} rad (< 5e-3); \
             contact mean |tau_m + tau_s| = {:.1}% of peak |tau_s| = {:.3} N·m (< 5%)",
            100.0 * force_ratio,
            cs.peak_slave_tau[1]
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Observer accuracy
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_observer_accuracy() {
    let params = PlantParams::default();
    let gains = ControlGains::default();
    let dt = 1e-3;
    let g = gains.g_dob;

    // Step disturbance into a blocked joint: the lumped estimate follows the
    // first-order response exactly.
    let mut dob = DobJoint::new();
    dob.update(0.0, 0.0, params.inertia.j1, g, dt);
    let d = 0.12;
    let mut at_tc = 0.0;
    let mut at_10tc = 0.0;
    for k in 1..=250 {
        let est = dob.update(d, 0.0, params.inertia.j1, g, dt);
        if k == 25 {
            at_tc = est;
        }
        if k == 250 {
            at_10tc = est;
        }
    }
    let frac_tc = at_tc / d;
    let ok_dob = (frac_tc - 0.632).abs() <= 0.01 && at_10tc >= 0.99 * d;

    // RFOB against a known static contact: press joint 2 onto a spring wall
    // with a constant torque and compare the recovered reaction.
    let wall = EnvironmentModel::SpringWall {
        joint: 1,
        position: -0.1,
        stiffness: 30.0,
        damping: 0.3,
        side: WallSide::Below,
    };
    let mut state = PlantState::at_rest(JointTriple::new(0.0, -0.099, 0.0));
    let mut chain = ObserverChain::new(&gains);
    let press = JointTriple::new(0.0, -0.05, 0.0);
    let mut applied = JointTriple::ZERO;
    let mut tau_res = JointTriple::ZERO;
    for tick in 0..2000u64 {
        let t = tick as f64 * dt;
        let s9 = chain.observe(state.theta, applied, &params, &gains, dt);
        tau_res = s9.tau;
        applied = press + bcil_core::control::compensation_torque(&params, &s9);
        for sub in 0..10 {
            state = step_plant(&state, applied, &wall, &params, t + sub as f64 * 1e-4, 1e-4)
                .unwrap()
                .state;
        }
    }
    let reaction = env_torque(&wall, &state, 2.0);
    let expected = -reaction.j2; // action the robot exerts on the wall
    let rfob_err = (tau_res.j2 - expected).abs() / expected.abs();
    let ok_rfob = rfob_err < 0.01;

    report(
        2,
        "observer accuracy",
        ok_dob && ok_rfob,
        format!(
            "DOB step response at 1/g = {:.4} of step (0.632 ± 0.01), {:.4} at 10/g (>= 0.99); \
             RFOB static contact error {:.2}% (< 1%)",
            frac_tc,
            at_10tc / d,
            100.0 * rfob_err
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Gradient exactness
// ---------------------------------------------------------------------------

fn finite_difference(
    weights: &ModelWeights,
    window: &SupervisedWindow,
    regime: TrainRegime,
    eps: f64,
) -> Vec<f64> {
    let mut probe = weights.clone();
    let mut out = vec![0.0; probe.data.len()];
    for p in 0..probe.data.len() {
        let orig = probe.data[p];
        probe.data[p] = orig + eps;
        let (_, lp) = window_forward(&probe, window, regime).unwrap();
        probe.data[p] = orig - eps;
        let (_, lm) = window_forward(&probe, window, regime).unwrap();
        probe.data[p] = orig;
        out[p] = (lp - lm) / (2.0 * eps);
    }
    out
}

#[test]
fn criterion_3_gradient_exactness() {
    let mut worst: f64 = 0.0;
    let mut rng = bcil_core::det::Rng64::new(99);
    for case in 0..4u64 {
        let layers = 1 + (case as usize % 2);
        let units = 4 + 2 * (case as usize % 3);
        let dim = 3 + (case as usize % 2) * 3;
        let steps = 8 + case as usize;
        let topo = Topology::new(dim, dim, units, layers);
        let weights = ModelWeights::init(topo, 17 + case);
        let window = SupervisedWindow {
            inputs: (0..steps)
                .map(|_| (0..dim).map(|_| rng.range(0.1, 0.9)).collect())
                .collect(),
            targets: (0..steps)
                .map(|_| (0..dim).map(|_| rng.range(0.1, 0.9)).collect())
                .collect(),
        };
        for regime in [
            TrainRegime::TeacherForced,
            TrainRegime::Autoregressive { anchor_period: 4 },
        ] {
            let (analytic, _) = bptt_gradients(&weights, &window, regime).unwrap();
            let numeric = finite_difference(&weights, &window, regime, 1e-6);
            for (a, n) in analytic.iter().zip(&numeric) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        // Re-anchoring every step reproduces teacher forcing exactly.
        let (g_tf, l_tf) = bptt_gradients(&weights, &window, TrainRegime::TeacherForced).unwrap();
        let (g_a1, l_a1) = bptt_gradients(
            &weights,
            &window,
            TrainRegime::Autoregressive { anchor_period: 1 },
        )
        .unwrap();
        assert!((l_tf - l_a1).abs() < 1e-12);
        let max_diff = g_tf
            .iter()
            .zip(&g_a1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-12, "anchor=1 differs from TF by {max_diff}");
    }
    report(
        3,
        "gradient exactness",
        worst < 1e-5,
        format!("max relative error vs central differences {worst:.2e} (< 1e-5), both regimes; anchor=1 equals teacher forcing to 1e-12"),
    );
}

// ---------------------------------------------------------------------------
// 4. Training sanity
// ---------------------------------------------------------------------------

fn smoothed(losses: &[f64], window: usize) -> Vec<f64> {
    losses
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect()
}

fn epochs_to(losses: &[f64], threshold: f64) -> usize {
    losses
        .iter()
        .position(|&l| l < threshold)
        .unwrap_or(losses.len())
}

#[test]
fn criterion_4_training_sanity() {
    // One demonstration window as the whole dataset. A steady-handed
    // operator keeps the master columns memorizable.
    let sim = SimConfig::default();
    let mut task = TaskSpec::write(55.0);
    task.jitter_amplitude = 0.005;
    let op = task.operator(50);
    let demo = run_demo(&task, &op, &sim, 50).unwrap();
    let seq = downsample(&demo).unwrap();
    // A mid-episode window: steady writing without the contact-onset jump.
    let window = TrainingSequence {
        rows: seq.rows[40..81].to_vec(),
    };
    let dataset = vec![window];

    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut convergence_epochs = HashMap::new();
    for (variant, ar) in [
        (ModelVariant::S2S, false),
        (ModelVariant::S2S, true),
        (ModelVariant::S2M, false),
        (ModelVariant::Sm2Sm, false),
        (ModelVariant::Sm2Sm, true),
    ] {
        let mut cfg = ModelConfig::new(variant, ar);
        cfg.lstm_layers = 1;
        cfg.units = 28;
        cfg.window = 40;
        cfg.batch_size = 1;
        cfg.epochs = if ar { 8000 } else { 4000 };
        cfg.adam.lr = 1.5e-3;
        cfg.seed = 4;
        let (_, report) = train(&dataset, &cfg).unwrap();
        let final_loss = *report.losses.last().unwrap();
        // Monotone descent down to the convergence target; the noise floor
        // below it may chatter. Smoothing spans 5% of the budget and brief
        // bumps under 10% are tolerated (free running regularly produces
        // them while the rollout distribution shifts).
        let smooth = smoothed(&report.losses, cfg.epochs / 20);
        let mut worst_uptick = 0.0f64;
        let monotone = smooth.windows(2).all(|w| {
            if w[0] <= 1e-4 {
                return true;
            }
            worst_uptick = worst_uptick.max((w[1] - w[0]) / w[0]);
            w[1] <= w[0] * 1.10 + 1e-7
        });
        let reach = epochs_to(&report.losses, 1e-3);
        convergence_epochs.insert(cfg.label(), reach);
        let ok = final_loss < 1e-4 && monotone;
        all_ok &= ok;
        lines.push(format!(
            "{}: final {final_loss:.1e}{}{}",
            cfg.label(),
            if monotone {
                String::new()
            } else {
                format!(" NON-MONOTONE (worst uptick {:.1}%)", worst_uptick * 100.0)
            },
            if final_loss < 1e-4 { "" } else { " ABOVE 1e-4" },
        ));
    }
    // Free running needs visibly more epochs than teacher forcing.
    let slower = |ar: &str, tf: &str| {
        let a = convergence_epochs[ar] as f64;
        let t = convergence_epochs[tf] as f64;
        a >= 1.2 * t
    };
    let ar_slower = slower("s2s-ar", "s2s") && slower("sm2sm-ar", "sm2sm");
    all_ok &= ar_slower;

    report(
        4,
        "training sanity",
        all_ok,
        format!(
            "{}; epochs to 1e-3: {:?}{}",
            lines.join("; "),
            {
                let mut v: Vec<_> = convergence_epochs.iter().collect();
                v.sort();
                v.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(" ")
            },
            if ar_slower { " (AR visibly slower)" } else { " (AR NOT slower)" }
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Exposure-bias reduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_exposure_bias_reduction() {
    let held = held_out_demo();
    let mut tf_mse = Vec::new();
    let mut ar_mse = Vec::new();
    for seed in 1..=5u64 {
        let tf = study_model("sm2sm", seed);
        let ar = study_model("sm2sm-ar", seed);
        tf_mse.push(metric_open_loop(&tf, held, 100).unwrap());
        ar_mse.push(metric_open_loop(&ar, held, 100).unwrap());
    }
    let tf_med = median(&mut tf_mse.clone());
    let ar_med = median(&mut ar_mse.clone());
    report(
        5,
        "exposure-bias reduction",
        ar_med < tf_med,
        format!(
            "held-out 100-step free-run MSE median over 5 seeds: \
             sm2sm-ar {ar_med:.4} < sm2sm {tf_med:.4} (per-seed ar {ar_mse:.4?} vs tf {tf_mse:.4?})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Autonomy loop correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_autonomy_loop_correctness() {
    let mut sim = SimConfig::default();
    sim.start_jitter = 0.0;
    let task = TaskSpec::free_motion(5.0);
    let op = task.operator(11);
    let demo = run_demo(&task, &op, &sim, 11).unwrap();

    // Replay oracle: the recorded master stream stands in for the model.
    let mut replay = ReplayPredictor::from_episode(&demo).unwrap();
    let auto = AutonomyConfig {
        max_duration_s: Some(demo.duration_s()),
        ..AutonomyConfig::default()
    };
    let rerun = run_with_source(&mut replay, &task, &sim, &auto, 11).unwrap();
    assert_eq!(rerun.rows.len(), demo.rows.len());
    let mut worst_dtheta: f64 = 0.0;
    for (a, b) in demo.rows.iter().zip(&rerun.rows) {
        worst_dtheta = worst_dtheta.max((a.slave.theta - b.slave.theta).abs_max());
    }

    // Identical controller arithmetic: recomputing the slave reference from
    // recorded inputs reproduces the recorded stream.
    let gains = ControlGains::default();
    let params = PlantParams::default();
    let mut worst_ref: f64 = 0.0;
    for row in &demo.rows {
        let re = slave_ref_autonomous(&row.master, &row.slave, &gains, &params);
        worst_ref = worst_ref.max((re - row.ref_slave).abs_max());
    }

    report(
        6,
        "autonomy loop correctness",
        worst_dtheta < 0.02 && worst_ref < 1e-9,
        format!(
            "replayed-master slave trajectory max |dtheta| {worst_dtheta:.2e} rad (< 0.02); \
             recomputed tau_ref_s differs by {worst_ref:.2e} (< 1e-9)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Matrix reproduction
// ---------------------------------------------------------------------------

fn reduced_draw_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::default_for(TaskKind::Draw).unwrap();
    spec.demo_trials = 4;
    spec.eval_trials = 1;
    spec.layers = vec![2];
    spec.units = 24;
    spec.window = 150;
    spec.batch_size = 16;
    spec.epochs = 500;
    spec.ar_epochs_factor = 1.6;
    spec.lr = 2e-3;
    spec.seed = 7;
    spec
}

#[test]
fn criterion_7_matrix_reproduction() {
    let dir = std::env::temp_dir().join("bcil-acceptance-matrix");
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    let spec = reduced_draw_spec();
    let result = run_matrix(&spec, &dir).unwrap();

    let labels: Vec<&str> = result.table.iter().map(|r| r.model.as_str()).collect();
    let ok_rows = labels == ["s2s", "s2s-ar", "s2m", "sm2sm", "sm2sm-ar"];
    let dims: Vec<(usize, usize)> = result
        .table
        .iter()
        .map(|r| (r.input_dims, r.output_dims))
        .collect();
    let ok_dims = dims == [(9, 9), (9, 9), (9, 9), (18, 18), (18, 18)];

    // Learned cells starred in the CSV header, unlearned not.
    let csv = std::fs::read_to_string(dir.join("success_rates.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    let ok_stars = header.contains(",0*")
        && header.contains(",20*")
        && header.contains(",40*")
        && header.contains(",-30,")
        && header.contains(",80,");
    let ok_cells = result
        .table
        .iter()
        .all(|r| r.cells.len() == spec.eval_grid.len());

    // Success-rate arithmetic agrees with an independent recount.
    let mut recount: HashMap<String, usize> = HashMap::new();
    for t in &result.trials {
        *recount.entry(t.model.clone()).or_default() += t.success as usize;
    }
    let ok_counts = result
        .table
        .iter()
        .all(|r| recount.get(&r.model).copied().unwrap_or(0) == r.successes());

    let ok_files = dir.join("loss_curves.csv").exists() && dir.join("trials.csv").exists();

    report(
        7,
        "matrix reproduction",
        ok_rows && ok_dims && ok_stars && ok_cells && ok_counts && ok_files,
        format!(
            "five rows {labels:?}, dims {dims:?}, starred learned cells, {} grid cells per row, counts verified",
            spec.eval_grid.len()
        ),
    );
    std::fs::remove_dir_all(&dir).ok();
}

// ---------------------------------------------------------------------------
// 8. Long-horizon repeatability
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_long_horizon_repeatability() {
    let sim = SimConfig::default();
    let task = TaskSpec::write(55.0);
    let mut variances: HashMap<&str, Vec<f64>> = HashMap::new();
    for kind in ["s2m", "sm2sm", "sm2sm-ar"] {
        for seed in 1..=3u64 {
            let model = study_model(kind, seed);
            let ep = run_autonomous(&model, &task, &sim, &AutonomyConfig::default(), 70 + seed)
                .unwrap();
            let v = match metric_cycle_variance(&ep, &task) {
                Ok(v) => v,
                // A run that never cycles is infinitely unrepeatable.
                Err(Error::NoCycles) => f64::INFINITY,
                Err(e) => panic!("cycle variance: {e}"),
            };
            variances.entry(kind).or_default().push(v);
        }
    }
    let med = |k: &str| median(&mut variances[k].clone());
    let (ar, tf, s2m) = (med("sm2sm-ar"), med("sm2sm"), med("s2m"));
    report(
        8,
        "long-horizon repeatability",
        ar <= tf && ar <= s2m && ar.is_finite(),
        format!(
            "median cycle deviation over 3 seeds: sm2sm-ar {ar:.4} <= sm2sm {tf:.4} and <= s2m {s2m:.4} \
             (per-seed ar {:?})",
            variances["sm2sm-ar"]
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism() {
    let dir = std::env::temp_dir().join("bcil-acceptance-det");
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    let sim = SimConfig::default();

    // Demo stage.
    let task = TaskSpec::write(55.0);
    let demo = |seed| {
        let op = task.operator(seed);
        episode_to_string(&run_demo(&task, &op, &sim, seed).unwrap())
    };
    let ok_demo = demo(5) == demo(5);

    // Train + checkpoint stage.
    let ep = {
        let op = task.operator(5);
        run_demo(&task, &op, &sim, 5).unwrap()
    };
    let dataset = vec![downsample(&ep).unwrap()];
    let mut cfg = ModelConfig::new(ModelVariant::S2S, true);
    cfg.lstm_layers = 1;
    cfg.units = 8;
    cfg.window = 40;
    cfg.batch_size = 4;
    cfg.epochs = 10;
    cfg.seed = 3;
    let ckpt_bytes = |tag: &str| {
        let (model, _) = train(&dataset, &cfg).unwrap();
        let p = dir.join(format!("m{tag}.bcil"));
        bcil_core::seqmodel::save_model(&model, &p).unwrap();
        std::fs::read(&p).unwrap()
    };
    let ok_train = ckpt_bytes("a") == ckpt_bytes("b");

    // Autonomous stage.
    let (model, _) = train(&dataset, &cfg).unwrap();
    let auto = AutonomyConfig {
        max_duration_s: Some(2.0),
        ..AutonomyConfig::default()
    };
    let run_str =
        |seed| episode_to_string(&run_autonomous(&model, &task, &sim, &auto, seed).unwrap());
    let ok_run = run_str(9) == run_str(9);

    // Matrix stage (miniature).
    let mut spec = reduced_draw_spec();
    spec.train_grid = vec![20.0];
    spec.eval_grid = vec![20.0];
    spec.demo_trials = 1;
    spec.layers = vec![1];
    spec.units = 8;
    spec.window = 40;
    spec.batch_size = 4;
    spec.epochs = 8;
    let matrix_csvs = |tag: &str| {
        let d = dir.join(format!("matrix-{tag}"));
        std::fs::create_dir_all(&d).unwrap();
        run_matrix(&spec, &d).unwrap();
        let mut bytes = Vec::new();
        for f in ["success_rates.csv", "loss_curves.csv", "trials.csv"] {
            bytes.extend(std::fs::read(d.join(f)).unwrap());
        }
        bytes
    };
    let ok_matrix = matrix_csvs("a") == matrix_csvs("b");

    // Plot stage.
    let csv = "epoch,loss\n0,1.0\n1,0.5\n2,0.25\n";
    let svg = |_tag: &str| bcil_core::plot::render_plot(csv, "mem").unwrap();
    let ok_plot = svg("a") == svg("b");

    report(
        9,
        "determinism",
        ok_demo && ok_train && ok_run && ok_matrix && ok_plot,
        format!(
            "byte-identical reruns: demo={ok_demo} train={ok_train} run={ok_run} matrix={ok_matrix} plot={ok_plot}"
        ),
    );
    std::fs::remove_dir_all(&dir).ok();
}
