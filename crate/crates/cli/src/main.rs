//! Command-line front end: fit, simulate, bootstrap, stability, select.

mod commands;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Regime-switching autoregression toolkit: exact filtering and EM fitting
/// of observation-driven switching models, simulation, stability
/// diagnostics, bootstrap intervals, and AIC/BIC comparison.
#[derive(Parser)]
#[command(name = "nhmsar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a series by multi-start EM (or least squares for the
    /// threshold family) and write a JSON report.
    Fit(FitArgs),
    /// Simulate a trajectory from a fitted parameter file.
    Simulate(SimulateArgs),
    /// Parametric-bootstrap confidence intervals around a fitted model.
    Bootstrap(BootstrapArgs),
    /// Companion-matrix stability diagnostics of a fitted parameter file.
    Stability(StabilityArgs),
    /// AIC/BIC comparison table across fit reports.
    Select(SelectArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input series CSV (header: index,value[,z1,..][,r1,..]).
    #[arg(long)]
    data: PathBuf,
    /// Transform applied to the value column before fitting.
    #[arg(long, default_value = "none")]
    transform: Transform,
    /// Model family.
    #[arg(long, default_value = "nhmsar")]
    family: FamilyArg,
    /// Number of regimes.
    #[arg(long = "M", default_value_t = 2)]
    m: usize,
    /// Autoregressive order.
    #[arg(long = "s", default_value_t = 2)]
    s: usize,
    /// Transition lag (1 <= r <= s).
    #[arg(long = "r", default_value_t = 2)]
    r: usize,
    /// Fixed transition floor pi0 (theta-doubleprime and msar modes).
    #[arg(long = "pi-fixed", default_value_t = 2.220446049250313e-16)]
    pi_fixed: f64,
    /// Identifiability constraint for the nhmsar family.
    #[arg(long, default_value = "theta-doubleprime")]
    constraint: ConstraintArg,
    /// Number of EM starts.
    #[arg(long, default_value_t = 20)]
    starts: usize,
    /// Master seed for the randomized starts.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// EM iteration cap.
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    /// EM stopping tolerance on the log-likelihood improvement.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Regime index the likelihood conditions on at time zero.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Output report path (JSON).
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
    /// Optional CSV of smoothed regime probabilities per time step.
    #[arg(long = "probs-out")]
    probs_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Parameter or fit-report JSON from a prior fit (or handwritten).
    #[arg(long)]
    params: PathBuf,
    /// Trajectory length.
    #[arg(long, default_value_t = 200)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial regime.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Optional series CSV supplying the conditioning window (its first s
    /// transformed values); zeros otherwise. Required covariate source for
    /// the rainfall family.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Transform applied to the data file's value column.
    #[arg(long, default_value = "none")]
    transform: Transform,
    #[arg(long, default_value = "sim.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BootstrapArgs {
    /// Fit-report JSON (must embed the fit configuration).
    #[arg(long)]
    params: PathBuf,
    /// The series the model was fitted to.
    #[arg(long)]
    data: PathBuf,
    /// Number of bootstrap replicates.
    #[arg(long = "B", default_value_t = 200)]
    replicates: usize,
    /// EM starts per replicate refit.
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "bootstrap.json")]
    out: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    /// Parameter or fit-report JSON holding Gaussian-AR parameters.
    #[arg(long)]
    params: PathBuf,
    /// Regime whose eigenvectors define the norm.
    #[arg(long = "basis-regime", default_value_t = 1)]
    basis_regime: usize,
    #[arg(long, default_value = "stability.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Fit-report JSON files to compare.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output stem: writes <out>.csv and <out>.txt.
    #[arg(long, default_value = "selection")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Transform {
    None,
    Log10,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FamilyArg {
    Nhmsar,
    Msar,
    Setar,
    Rainfall,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ConstraintArg {
    /// Slopes bounded away from zero, floors estimated.
    ThetaPrime,
    /// Floors pinned to --pi-fixed.
    ThetaDoubleprime,
}

/// Process failure with the documented exit codes.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    /// Exit 2: malformed input.
    pub fn parse(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
    /// Exit 3: estimation failed.
    pub fn fit(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 3,
        }
    }
    /// Exit 4: parameter file missing or unreadable.
    pub fn missing_params(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 4,
        }
    }
}

fn main() -> ExitCode {
    if let Ok(raw) = std::env::var("REGIME_SWITCH_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Bootstrap(args) => commands::bootstrap(args),
        Command::Stability(args) => commands::stability(args),
        Command::Select(args) => commands::select(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
