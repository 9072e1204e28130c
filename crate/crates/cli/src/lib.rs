//! Command-line front end: configuration, orchestration and report output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 model error.

pub mod commands;
pub mod config;
pub mod markdown;
pub mod pipeline;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_evaluate, cmd_explain, cmd_forecast, cmd_simulate_exog, cmd_stats};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pforecast", version, about = "Project performance forecasting reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summary statistics and correlation tables.
    Stats(Common),
    /// Fit the selected models and forecast.
    Forecast(Common),
    /// Cross-validate and rank the selected models.
    Evaluate(Common),
    /// Shapley attribution of the explain model's features.
    Explain(Common),
    /// Print or write simulated weather and resource availability.
    SimulateExog(SimulateArgs),
}

/// Flags override the matching config fields.
#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed for training, folds and the exogenous simulation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    wbs: Option<String>,
    /// Rolling-average window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated: evm, arima, arima-exog, lstm, oracle, constant.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 60)]
    periods: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for `exog.csv`; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = base_config(&c.config)?;
    if let Some(v) = &c.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
        cfg.exog.seed = v;
    }
    if let Some(v) = &c.target {
        cfg.target = v.clone();
    }
    if let Some(v) = &c.wbs {
        cfg.wbs = Some(v.clone());
    }
    if let Some(v) = c.window {
        cfg.window = v;
    }
    if let Some(v) = c.horizon {
        cfg.horizon = v;
    }
    if let Some(names) = &c.models {
        cfg.models = names
            .iter()
            .map(|n| config::default_model(n.trim(), &cfg.target))
            .collect::<Result<_, _>>()?;
    }
    cfg.parallel |= c.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stats(c) => cmd_stats(&resolve(&c)?).map(drop),
        Command::Forecast(c) => cmd_forecast(&resolve(&c)?).map(drop),
        Command::Evaluate(c) => cmd_evaluate(&resolve(&c)?).map(drop),
        Command::Explain(c) => cmd_explain(&resolve(&c)?).map(drop),
        Command::SimulateExog(a) => {
            let mut cfg = base_config(&a.config)?;
            if let Some(s) = a.seed {
                cfg.exog.seed = s;
            }
            let csv = cmd_simulate_exog(&cfg, a.periods)?;
            match a.out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
                    let path = dir.join("exog.csv");
                    std::fs::write(&path, csv).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
                }
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pforecast: {e}");
            e.exit_code()
        }
    }
}
