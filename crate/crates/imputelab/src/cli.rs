use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use imputelab_core::pipeline::LeakageMode;

use crate::config::{ConfigError, Overrides, RunConfig, Task};
use crate::exec::RayonExecutor;
use crate::tasks::{execute, RunError};

#[derive(Debug, Parser)]
#[command(name = "imputelab", version, about = "Participant-level imputation benchmark for longitudinal sensing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Availability of the selected features, overall and per feature/participant.
    Availability(Common),
    /// Remove observed values under a missingness mechanism and write the plan.
    Ampute(Common),
    /// Impute every participant with each configured strategy.
    Impute(Common),
    /// Ampute once, impute with each strategy and score r-RMSE.
    Reconstruct(Common),
    /// Within-person prediction on a chronological week split.
    Predict(Common),
    /// Week-by-week inductive prediction from week 3 to week 10.
    Realtime(Common),
    /// Little's MCAR test per participant with Benjamini-Hochberg correction.
    McarTest(Common),
    /// Generate a synthetic dataset.
    Synth(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Leakage {
    Full,
    TrainOnly,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; replaces the config's `dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated feature names.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Comma-separated strategy names (or kinds) to keep.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
    /// Amputation rate in percent.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_enum)]
    leakage: Option<Leakage>,
}

impl Command {
    fn split(self) -> (Task, Common) {
        match self {
            Command::Availability(c) => (Task::Availability, c),
            Command::Ampute(c) => (Task::Ampute, c),
            Command::Impute(c) => (Task::Impute, c),
            Command::Reconstruct(c) => (Task::Reconstruct, c),
            Command::Predict(c) => (Task::Predict, c),
            Command::Realtime(c) => (Task::Realtime, c),
            Command::McarTest(c) => (Task::McarTest, c),
            Command::Synth(c) => (Task::Synth, c),
        }
    }
}

fn init_logging() {
    let filter = std::env::var("IMPUTELAB_LOG").unwrap_or_else(|_| "info".into());
    // a second call (tests running the CLI in-process) keeps the first logger
    let _ = env_logger::Builder::new()
        .parse_filters(&filter)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

fn resolve(task: Task, c: Common) -> Result<(RunConfig, Option<usize>), ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = c.dataset {
        cfg.dataset = Some(d);
    }
    cfg.task = Some(task);
    if c.jobs == Some(0) {
        return Err(ConfigError("--jobs: must be at least 1".into()));
    }
    let overrides = Overrides {
        seed: c.seed,
        out: c.out,
        features: c.features,
        strategy: c.strategy,
        r: c.r,
        leakage: c.leakage.map(|l| match l {
            Leakage::Full => LeakageMode::Full,
            Leakage::TrainOnly => LeakageMode::TrainOnly,
        }),
    };
    Ok((cfg.resolve(&overrides)?, c.jobs))
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 on configuration errors, 3 on data errors, 1 when outputs cannot be
/// written.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    let (task, common) = cli.command.split();
    let started = Instant::now();
    let result = resolve(task, common)
        .map_err(|e| RunError::Config(e.0))
        .and_then(|(cfg, jobs)| {
            let exec = RayonExecutor::new(jobs).map_err(|e| RunError::Config(format!("--jobs: {e}")))?;
            log::info!("{} with {} worker(s)", task.as_str(), exec.workers());
            let (written, summary) = execute(task, &cfg, &exec)?;
            Ok((written, summary))
        });
    match result {
        Ok((written, summary)) => {
            let mut text = summary.render();
            if let Some(dir) = written.first().and_then(|p| p.parent()) {
                text.push_str(&format!("wrote {} file(s) to {}\n", written.len(), dir.display()));
            }
            text.push_str(&format!("elapsed {:.2} s\n", started.elapsed().as_secs_f64()));
            // a closed stdout (e.g. piped into `head`) is not an error
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("imputelab: error: {msg}");
            e.exit_code()
        }
    }
}
