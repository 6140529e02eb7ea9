//! Command-line experiment runner: dispatches config-driven Monte Carlo
//! experiments, writes CSV tables plus a JSON run manifest, and reflects
//! declared acceptance checks in its exit code (0 pass, 1 criterion failed,
//! 2 usage or configuration error).

mod config;
mod manifest;
mod runner;
mod table;

use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

use config::ExperimentConfig;
use manifest::{timestamp, RunManifest};
use runner::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] kbm_core::KbmError),
}

#[derive(Debug, Parser)]
#[command(name = "kbm", version, about = "Kinetic Brownian motion experiments")]
struct Cli {
    /// TOML experiment configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for tables and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long, global = true)]
    paths: Option<u64>,
    /// Time steps per path (default scales with the horizon).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Comma-separated horizon list.
    #[arg(long = "T", global = true, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Compare dual-weight gradients against finite differences.
    IbpCheck,
    /// Renormalized Malliavin matrix moments against the limit law.
    MatrixLimit,
    /// Renormalized dual weight rows against the limit law.
    DualLimit {
        /// Basis modes for the limit sampler.
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Dual-norm horizon scan with fitted decay rates.
    Rates,
    /// Law-of-large-numbers deviations of circle averages.
    Lln {
        /// Comma-separated oscillation frequencies.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Reflection-coupling survival and semigroup differences.
    Coupling {
        /// Starting angle of the mirrored pair.
        #[arg(long)]
        u0: Option<f64>,
        /// Couple on the circle (barriers at 0 and pi) instead of the line.
        #[arg(long)]
        circle: bool,
        /// Catalog test function name.
        #[arg(long)]
        function: Option<String>,
    },
    /// Sub-Gaussian tails of the oscillation functional.
    Tails,
    /// Negative moments of a shifted Gaussian.
    Negmom {
        /// Moment exponent in (0, 1).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Dump one sampled driver with basis diagnostics.
    PathsDebug,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::IbpCheck => "ibp-check",
            Command::MatrixLimit => "matrix-limit",
            Command::DualLimit { .. } => "dual-limit",
            Command::Rates => "rates",
            Command::Lln { .. } => "lln",
            Command::Coupling { .. } => "coupling",
            Command::Tails => "tails",
            Command::Negmom { .. } => "negmom",
            Command::PathsDebug => "paths-debug",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(declared) = &cfg.experiment {
        if declared != cli.command.name() {
            return Err(CliError::Config(format!(
                "experiment: config declares {declared:?} but the {} subcommand was invoked",
                cli.command.name()
            )));
        }
    }

    // Command-line flags override the file.
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.paths = cli.paths.or(cfg.paths);
    cfg.grid = cli.grid.or(cfg.grid);
    cfg.threads = cli.threads.or(cfg.threads);
    cfg.horizons = cli.horizons.clone().or(cfg.horizons.take());
    cfg.out = cli.out.clone().or(cfg.out.take());
    match &cli.command {
        Command::DualLimit { modes } => cfg.modes = modes.or(cfg.modes),
        Command::Lln { lambdas } => cfg.lambdas = lambdas.clone().or(cfg.lambdas.take()),
        Command::Coupling { u0, circle, function } => {
            cfg.u0 = u0.or(cfg.u0);
            cfg.circle = Some(*circle || cfg.circle.unwrap_or(false));
            cfg.function = function.clone().or(cfg.function.take());
        }
        Command::Negmom { alpha } => cfg.alpha = alpha.or(cfg.alpha),
        _ => {}
    }
    cfg.experiment = Some(cli.command.name().to_string());
    cfg.validate()?;

    let settings = Settings {
        seed: cfg.seed.unwrap_or(0),
        threads: cfg.threads.unwrap_or(0),
        paths: cfg.paths,
        grid: cfg.grid,
        horizons: cfg.horizons.clone(),
        modes: cfg.modes,
        lambdas: cfg.lambdas.clone(),
        u0: cfg.u0,
        circle: cfg.circle.unwrap_or(false),
        function: cfg.function.as_deref().and_then(kbm_core::TestFunction::from_name),
        thresholds: cfg.thresholds.clone(),
        alpha: cfg.alpha,
        tolerance_sigma: cfg.tolerance_sigma.unwrap_or(3.0),
        fd_step: cfg.fd_step.unwrap_or(1e-3),
    };

    let started_at = timestamp();
    let outcome = match &cli.command {
        Command::IbpCheck => runner::ibp_check(&settings)?,
        Command::MatrixLimit => runner::matrix_limit(&settings)?,
        Command::DualLimit { .. } => runner::dual_limit(&settings)?,
        Command::Rates => runner::rates(&settings)?,
        Command::Lln { .. } => runner::lln(&settings)?,
        Command::Coupling { .. } => runner::coupling(&settings)?,
        Command::Tails => runner::tails(&settings)?,
        Command::Negmom { .. } => runner::negmom(&settings)?,
        Command::PathsDebug => runner::paths_debug(&settings)?,
    };

    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))?;
    let mut tables = BTreeMap::new();
    for table in &outcome.tables {
        table.write(&out_dir)?;
        tables.insert(table.name().to_string(), table.rows());
    }
    RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION"),
        experiment: cli.command.name().to_string(),
        config_sha256: cfg.sha256(),
        master_seed: settings.seed,
        started_at,
        finished_at: timestamp(),
        tables,
        singular: outcome.singular,
        criteria_passed: outcome.passed,
    }
    .write(&out_dir)?;

    if !outcome.passed {
        eprintln!("{}: declared acceptance check failed", cli.command.name());
    }
    Ok(outcome.passed)
}
