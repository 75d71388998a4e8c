//! The full study harness: generate demonstrations over a parameter grid,
//! train the five model configurations, evaluate every grid cell, and emit
//! the success-rate and loss-curve tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autonomy::{run_autonomous, AutonomyConfig};
use crate::det::derive_seed;
use crate::episode::{downsample, save_episode, Episode, TrainingSequence};
use crate::error::{Error, Result};
use crate::metrics::{metric_corridor, metric_cycle_variance, metric_open_loop, metric_sync};
use crate::seqmodel::{save_model, train, AdamParams, ModelConfig, ModelVariant, SequenceModel};
use crate::task::{TaskKind, TaskSpec};
use crate::teleop::{run_demo, SimConfig};

/// Grid and budget description of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub task: TaskKind,
    /// Task parameter values demonstrations are collected at.
    pub train_grid: Vec<f64>,
    /// Task parameter values autonomy is evaluated at (superset of train).
    pub eval_grid: Vec<f64>,
    /// Demonstrations per training cell.
    pub demo_trials: usize,
    /// Autonomous trials per evaluation cell.
    pub eval_trials: usize,
    /// LSTM depths to run (the erase study compares two).
    pub layers: Vec<usize>,
    pub units: usize,
    pub window: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Extra epochs multiplier for autoregressive configurations.
    pub ar_epochs_factor: f64,
    pub lr: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Study defaults per task, mirroring the original data budgets.
    pub fn default_for(task: TaskKind) -> Result<ExperimentSpec> {
        let spec = match task {
            TaskKind::Draw => ExperimentSpec {
                task,
                train_grid: vec![0.0, 20.0, 40.0],
                eval_grid: (-3..=8).map(|k| k as f64 * 10.0).collect(),
                demo_trials: 8,
                eval_trials: 3,
                layers: vec![6],
                units: 50,
                window: 150,
                batch_size: 100,
                epochs: 300,
                ar_epochs_factor: 2.0,
                lr: 1e-3,
                seed: 1,
            },
            TaskKind::Erase => ExperimentSpec {
                task,
                train_grid: vec![35.0, 55.0, 75.0],
                eval_grid: vec![35.0, 45.0, 55.0, 65.0, 75.0],
                demo_trials: 5,
                eval_trials: 3,
                layers: vec![2, 4],
                units: 50,
                window: 300,
                batch_size: 100,
                epochs: 300,
                ar_epochs_factor: 2.0,
                lr: 1e-3,
                seed: 1,
            },
            TaskKind::Write => ExperimentSpec {
                task,
                train_grid: vec![35.0, 55.0, 75.0],
                eval_grid: vec![35.0, 45.0, 55.0, 65.0, 75.0],
                demo_trials: 10,
                eval_trials: 2,
                layers: vec![6],
                units: 50,
                window: 200,
                batch_size: 100,
                epochs: 300,
                ar_epochs_factor: 2.0,
                lr: 1e-3,
                seed: 1,
            },
            TaskKind::Free => {
                return Err(Error::InvalidConfig(
                    "free motion has no experiment matrix".into(),
                ))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_grid.is_empty() {
            return Err(Error::InvalidConfig("empty training grid".into()));
        }
        for v in &self.train_grid {
            if !self.eval_grid.contains(v) {
                return Err(Error::InvalidConfig(format!(
                    "evaluation grid must contain every training value (missing {v})"
                )));
            }
        }
        if self.demo_trials == 0 || self.eval_trials == 0 || self.layers.is_empty() {
            return Err(Error::InvalidConfig("empty trial or layer budget".into()));
        }
        Ok(())
    }

    /// The five model configurations, in table order.
    pub fn model_configs(&self, layers: usize) -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(5);
        for (variant, ar) in [
            (ModelVariant::S2S, false),
            (ModelVariant::S2S, true),
            (ModelVariant::S2M, false),
            (ModelVariant::Sm2Sm, false),
            (ModelVariant::Sm2Sm, true),
        ] {
            let mut cfg = ModelConfig::new(variant, ar);
            cfg.lstm_layers = layers;
            cfg.units = self.units;
            cfg.window = self.window;
            cfg.batch_size = self.batch_size;
            cfg.epochs = if ar {
                (self.epochs as f64 * self.ar_epochs_factor).round() as usize
            } else {
                self.epochs
            };
            cfg.adam = AdamParams {
                lr: self.lr,
                ..AdamParams::default()
            };
            cfg.seed = derive_seed(self.seed, &format!("train-{}-{layers}", cfg.label()));
            out.push(cfg);
        }
        out
    }

    fn task_instance(&self, parameter: f64) -> TaskSpec {
        match self.task {
            TaskKind::Draw => TaskSpec::draw(parameter),
            TaskKind::Erase => TaskSpec::erase(parameter),
            TaskKind::Write => TaskSpec::write(parameter),
            TaskKind::Free => unreachable!("validated"),
        }
    }
}

/// One evaluated trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub model: String,
    pub layers: usize,
    pub parameter: f64,
    pub trial: usize,
    pub success: bool,
    pub stopped: bool,
    /// Mean per-joint |command - response| of the autonomous run, rad.
    pub tracking_err: f64,
    /// Cycle-to-cycle deviation for periodic tasks; infinite when the run
    /// never cycles.
    pub cycle_deviation: Option<f64>,
    pub diagnostics: String,
}

/// Aggregated outcome of a matrix run.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub trials: Vec<TrialResult>,
    /// (model label, layers, dims in, dims out, per-cell successes)
    pub table: Vec<SuccessRow>,
}

#[derive(Clone, Debug)]
pub struct SuccessRow {
    pub model: String,
    pub layers: usize,
    pub input_dims: usize,
    pub output_dims: usize,
    pub autoregressive: bool,
    /// (parameter, learned?, successes, trials)
    pub cells: Vec<(f64, bool, usize, usize)>,
    pub continued: usize,
    pub total_trials: usize,
    /// 100-step free-run MSE on a held-out demo; absent for variants whose
    /// output space differs from their input space.
    pub open_loop_mse: Option<f64>,
}

impl SuccessRow {
    pub fn successes(&self) -> usize {
        self.cells.iter().map(|c| c.2).sum()
    }

    pub fn success_rate(&self) -> f64 {
        if self.total_trials == 0 {
            0.0
        } else {
            100.0 * self.successes() as f64 / self.total_trials as f64
        }
    }
}

/// Runs the whole matrix, writing demos, models, loss curves, per-trial
/// results, and the success table under `out_dir`.
pub fn run_matrix(spec: &ExperimentSpec, out_dir: &Path) -> Result<MetricsReport> {
    spec.validate()?;
    let sim = SimConfig::default();
    let demos_dir = out_dir.join("demos");
    let models_dir = out_dir.join("models");
    fs::create_dir_all(&demos_dir)?;
    fs::create_dir_all(&models_dir)?;

    // Demonstrations over the training grid, plus one held-out demo for the
    // open-loop prediction metric.
    let mut dataset: Vec<TrainingSequence> = Vec::new();
    for &param in &spec.train_grid {
        for trial in 0..spec.demo_trials {
            let task = spec.task_instance(param);
            let seed = derive_seed(spec.seed, &format!("demo-{param}-{trial}"));
            let op = task.operator(seed);
            let ep = run_demo(&task, &op, &sim, seed)?;
            let name = format!("demo_{}_{}_{}.csv", task.name(), param, trial);
            save_episode(&ep, &demos_dir.join(name))?;
            dataset.push(downsample(&ep)?);
        }
    }
    let held_out: Episode = {
        let param = spec.train_grid[0];
        let task = spec.task_instance(param);
        let seed = derive_seed(spec.seed, "held-out-demo");
        let op = task.operator(seed);
        run_demo(&task, &op, &sim, seed)?
    };
    let open_loop_horizon = 100.min(downsample(&held_out)?.len().saturating_sub(1));

    // Train the five configurations per depth, evaluate over the grid.
    let mut trials = Vec::new();
    let mut table = Vec::new();
    let mut loss_csv = String::from("model,layers,epoch,loss\n");
    for &layers in &spec.layers {
        for cfg in spec.model_configs(layers) {
            let (model, report) = train(&dataset, &cfg)?;
            let label = cfg.label();
            save_model(&model, &models_dir.join(format!("{label}_{layers}l.bcil")))?;
            for (epoch, loss) in report.losses.iter().enumerate() {
                let _ = writeln!(loss_csv, "{label},{layers},{epoch},{loss}");
            }

            let open_loop_mse = if cfg.variant.supports_autoregression() {
                Some(metric_open_loop(&model, &held_out, open_loop_horizon)?)
            } else {
                None
            };

            let mut cells = Vec::new();
            let mut continued = 0usize;
            let mut total = 0usize;
            for &param in &spec.eval_grid {
                let task = spec.task_instance(param);
                let mut successes = 0usize;
                for trial in 0..spec.eval_trials {
                    let seed = derive_seed(
                        spec.seed,
                        &format!("eval-{label}-{layers}-{param}-{trial}"),
                    );
                    let result = match evaluate_trial(&model, &task, &sim, seed) {
                        Ok(t) => t,
                        Err(Error::NonFinite { tick, .. }) => TrialMetrics {
                            success: false,
                            stopped: true,
                            tracking_err: f64::INFINITY,
                            cycle_deviation: None,
                            diagnostics: format!("diverged at tick {tick}"),
                        },
                        Err(e) => return Err(e),
                    };
                    successes += result.success as usize;
                    continued += !result.stopped as usize;
                    total += 1;
                    trials.push(TrialResult {
                        model: label.clone(),
                        layers,
                        parameter: param,
                        trial,
                        success: result.success,
                        stopped: result.stopped,
                        tracking_err: result.tracking_err,
                        cycle_deviation: result.cycle_deviation,
                        diagnostics: result.diagnostics,
                    });
                }
                let learned = spec.train_grid.contains(&param);
                cells.push((param, learned, successes, spec.eval_trials));
            }
            table.push(SuccessRow {
                model: label,
                layers,
                input_dims: cfg.variant.input_dim(),
                output_dims: cfg.variant.output_dim(),
                autoregressive: cfg.autoregressive,
                cells,
                continued,
                total_trials: total,
                open_loop_mse,
            });
        }
    }

    fs::write(out_dir.join("loss_curves.csv"), loss_csv)?;
    fs::write(out_dir.join("trials.csv"), trials_csv(&trials))?;
    fs::write(out_dir.join("success_rates.csv"), success_csv(&table))?;

    Ok(MetricsReport { trials, table })
}

struct TrialMetrics {
    success: bool,
    stopped: bool,
    tracking_err: f64,
    cycle_deviation: Option<f64>,
    diagnostics: String,
}

fn evaluate_trial(
    model: &SequenceModel,
    task: &TaskSpec,
    sim: &SimConfig,
    seed: u64,
) -> Result<TrialMetrics> {
    let ep = run_autonomous(model, task, sim, &AutonomyConfig::default(), seed)?;
    let corridor = metric_corridor(&ep, task)?;
    let stopped = corridor.diagnostics.iter().any(|d| d.contains("stopped"));
    // In autonomous episodes the master columns hold the command, so the
    // sync metric doubles as command-tracking error.
    let sync = metric_sync(&ep, 0.5)?;
    let tracking_err = sync.mean_pos_err.iter().sum::<f64>() / 3.0;
    let cycle_deviation = match task.kind {
        TaskKind::Write => Some(match metric_cycle_variance(&ep, task) {
            Ok(v) => v,
            Err(Error::NoCycles) => f64::INFINITY,
            Err(e) => return Err(e),
        }),
        _ => None,
    };
    Ok(TrialMetrics {
        success: corridor.success,
        stopped,
        tracking_err,
        cycle_deviation,
        diagnostics: corridor.diagnostics.join("; "),
    })
}

fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from(
        "model,layers,parameter,trial,success,stopped,tracking_err_rad,cycle_deviation_rad,diagnostics\n",
    );
    for t in trials {
        let dev = match t.cycle_deviation {
            Some(v) if v.is_finite() => v.to_string(),
            Some(_) => "inf".into(),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},\"{}\"",
            t.model,
            t.layers,
            t.parameter,
            t.trial,
            t.success,
            t.stopped,
            t.tracking_err,
            dev,
            t.diagnostics
        );
    }
    out
}

/// Success table: one row per configuration, one column per grid value,
/// learned cells starred, plus subtotal and continuation columns.
pub fn success_csv(table: &[SuccessRow]) -> String {
    let mut out = String::from("model,layers,input_dims,output_dims,autoregressive");
    if let Some(first) = table.first() {
        for (param, learned, _, _) in &first.cells {
            let star = if *learned { "*" } else { "" };
            let _ = write!(out, ",{param}{star}");
        }
    }
    out.push_str(",total_pct,total_frac,continued_pct,open_loop_mse\n");
    for row in table {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            row.model, row.layers, row.input_dims, row.output_dims, row.autoregressive
        );
        for (_, _, successes, trials) in &row.cells {
            let pct = 100.0 * *successes as f64 / (*trials).max(1) as f64;
            let _ = write!(out, ",{pct:.1}");
        }
        let continued_pct = 100.0 * row.continued as f64 / row.total_trials.max(1) as f64;
        let open_loop = row
            .open_loop_mse
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            ",{:.1},{}/{},{continued_pct:.1},{open_loop}",
            row.success_rate(),
            row.successes(),
            row.total_trials
        );
    }
    out
}
