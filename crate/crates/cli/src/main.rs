//! `bcil`: command-line harness for the bilateral-control imitation
//! learning workbench: record demonstrations, train sequence models, run
//! autonomous operation, evaluate episodes, and drive the full study matrix.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

mod specfile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bcil_core::autonomy::{run_autonomous, AutonomyConfig};
use bcil_core::episode::{downsample, load_episode, save_episode, TrainingSequence};
use bcil_core::error::{Error, Result};
use bcil_core::experiment::{run_matrix, ExperimentSpec};
use bcil_core::metrics::{metric_corridor, metric_cycle_variance, metric_open_loop, metric_sync};
use bcil_core::plot::emit_plot;
use bcil_core::seqmodel::{load_model, save_model, train, AdamParams, ModelConfig, ModelVariant};
use bcil_core::task::{TaskKind, TaskSpec};
use bcil_core::teleop::{run_demo, SimConfig};

#[derive(Parser)]
#[command(
    name = "bcil",
    version,
    about = "Bilateral-control imitation learning workbench",
    after_help = "Tasks: free, draw (parameter = inclination deg), erase, write (parameter = height mm).\n\
                  Default gains and plant parameters follow the identified 3-DOF arm; all\n\
                  randomness is seeded, so identical invocations produce identical files."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record bilateral demonstrations with the scripted operator.
    Demo(DemoArgs),
    /// Train a sequence model on recorded episodes.
    Train(TrainArgs),
    /// Run autonomous operation with a trained model.
    Run(RunArgs),
    /// Compute metrics for a recorded episode.
    Eval(EvalArgs),
    /// Run the full study: demos, five model configurations, grid evaluation.
    Matrix(MatrixArgs),
    /// Render a CSV table to an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Task name: free | draw | erase | write.
    #[arg(long)]
    task: String,
    /// Task parameter values to record at, e.g. "0,20,40".
    #[arg(long, default_value = "0", value_delimiter = ',')]
    grid: Vec<f64>,
    /// Demonstrations per grid value.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Master seed; each trial derives its own stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the task's demonstration length, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory for episode CSV files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Model variant: s2s | s2m | sm2sm.
    #[arg(long)]
    variant: String,
    /// Train autoregressively (free running, re-anchored every --anchor steps).
    #[arg(long)]
    ar: bool,
    /// Ground-truth re-injection period in steps.
    #[arg(long, default_value_t = 10)]
    anchor: usize,
    #[arg(long, default_value_t = 6)]
    layers: usize,
    #[arg(long, default_value_t = 50)]
    units: usize,
    /// Window length in 20 ms steps.
    #[arg(long, default_value_t = 150)]
    window: usize,
    /// Windows per optimizer step.
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Episode CSV files or directories of them.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Checkpoint path to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Task name: draw | erase | write | free.
    #[arg(long)]
    task: String,
    /// Task parameter (inclination deg or height mm).
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    /// Run length, s (defaults to the task's evaluation length).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Episode CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Episode CSV to evaluate.
    #[arg(long)]
    episode: PathBuf,
    /// Task the episode belongs to.
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    /// Transient cut before sync metrics, s.
    #[arg(long, default_value_t = 0.5)]
    transient: f64,
    /// Optional model for open-loop prediction error.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Free-run horizon in 20 ms steps for --model.
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// Metrics CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    /// Experiment spec file; defaults are used for anything unset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Task to run with built-in defaults when no spec file is given.
    #[arg(long)]
    task: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV: first column is x, remaining columns are series.
    #[arg(long)]
    csv: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Demo(args) => cmd_demo(args),
        Command::Train(args) => cmd_train(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn build_task(name: &str, param: f64, duration: Option<f64>) -> Result<TaskSpec> {
    let mut task = TaskSpec::by_name(name, param)?;
    if let Some(d) = duration {
        if d <= 0.0 {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        task.duration = d;
    }
    Ok(task)
}

fn cmd_demo(args: DemoArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let sim = SimConfig::default();
    for &param in &args.grid {
        for trial in 0..args.trials {
            let task = build_task(&args.task, param, args.duration)?;
            let seed = bcil_core::det::derive_seed(args.seed, &format!("demo-{param}-{trial}"));
            let op = task.operator(seed);
            let ep = run_demo(&task, &op, &sim, seed)?;
            let name = format!("demo_{}_{}_{}.csv", task.name(), param, trial);
            let path = args.out.join(&name);
            save_episode(&ep, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn collect_episodes(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(files)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let variant: ModelVariant = args.variant.parse()?;
    let mut config = ModelConfig::new(variant, args.ar);
    config.lstm_layers = args.layers;
    config.units = args.units;
    config.window = args.window;
    config.batch_size = args.batch;
    config.epochs = args.epochs;
    config.anchor_period = args.anchor;
    config.adam = AdamParams {
        lr: args.lr,
        ..AdamParams::default()
    };
    config.seed = args.seed;
    config.validate()?;

    let mut dataset: Vec<TrainingSequence> = Vec::new();
    for file in collect_episodes(&args.data)? {
        let ep = load_episode(&file)?;
        dataset.push(downsample(&ep)?);
    }
    let (model, report) = train(&dataset, &config)?;
    save_model(&model, &args.out)?;
    println!(
        "trained {} on {} sequences: final loss {:.6} ({} epochs, {:.1} s)",
        config.label(),
        dataset.len(),
        report.losses.last().unwrap(),
        config.epochs,
        report.wall_time_s
    );
    if let Some(report_path) = args.report {
        let mut csv = String::from("epoch,loss\n");
        for (e, l) in report.losses.iter().enumerate() {
            csv.push_str(&format!("{e},{l}\n"));
        }
        std::fs::write(&report_path, csv)?;
        println!("wrote {}", report_path.display());
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let task = build_task(&args.task, args.param, None)?;
    let sim = SimConfig::default();
    let auto = AutonomyConfig {
        max_duration_s: args.duration,
        ..AutonomyConfig::default()
    };
    let ep = run_autonomous(&model, &task, &sim, &auto, args.seed)?;
    save_episode(&ep, &args.out)?;
    println!(
        "wrote {} ({} rows, {} predictions)",
        args.out.display(),
        ep.rows.len(),
        ep.meta_str("predictions").unwrap_or("?")
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let ep = load_episode(&args.episode)?;
    let task = build_task(&args.task, args.param, None)?;
    let mut csv = String::from("metric,j1,j2,j3\n");

    let sync = metric_sync(&ep, args.transient)?;
    let row = |name: &str, v: [f64; 3]| format!("{name},{},{},{}\n", v[0], v[1], v[2]);
    csv.push_str(&row("mean_pos_err_rad", sync.mean_pos_err));
    csv.push_str(&row("max_pos_err_rad", sync.max_pos_err));
    csv.push_str(&row("mean_force_sum_Nm", sync.mean_force_sum));
    csv.push_str(&row("peak_slave_tau_Nm", sync.peak_slave_tau));

    if !matches!(task.kind, TaskKind::Free) {
        let corridor = metric_corridor(&ep, &task)?;
        csv.push_str(&format!("corridor_success,{},,\n", corridor.success as u8));
        csv.push_str(&format!("corridor_events,{},,\n", corridor.events));
        if !corridor.diagnostics.is_empty() {
            csv.push_str(&format!(
                "corridor_diagnostics,\"{}\",,\n",
                corridor.diagnostics.join("; ")
            ));
        }
        if matches!(task.kind, TaskKind::Write) {
            match metric_cycle_variance(&ep, &task) {
                Ok(v) => csv.push_str(&format!("cycle_variance_rad,{v},,\n")),
                Err(Error::NoCycles) => csv.push_str("cycle_variance_rad,inf,,\n"),
                Err(e) => return Err(e),
            }
        }
    }

    if let Some(model_path) = &args.model {
        let model = load_model(model_path)?;
        let mse = metric_open_loop(&model, &ep, args.horizon)?;
        csv.push_str(&format!("open_loop_mse_{}steps,{mse},,\n", args.horizon));
    }

    std::fs::write(&args.out, &csv)?;
    print!("{csv}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<()> {
    let spec = match (&args.spec, &args.task) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            specfile::parse_spec(&text, &path.display().to_string())?
        }
        (None, Some(task)) => {
            let kind: TaskKind = task.parse()?;
            ExperimentSpec::default_for(kind)?
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "matrix needs --spec FILE or --task NAME".into(),
            ))
        }
    };
    std::fs::create_dir_all(&args.out)?;
    let report = run_matrix(&spec, &args.out)?;
    print!("{}", bcil_core::experiment::success_csv(&report.table));
    println!("wrote {}", args.out.join("success_rates.csv").display());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    emit_plot(&args.csv, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
