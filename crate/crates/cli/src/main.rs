//! `gibbs-lsi`: runs one experiment and writes its report.
//!
//! Exit codes: 0 on success, 1 when a hard check fails or the computation
//! errors, 2 on usage or configuration errors.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{validate_config, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "gibbs-lsi", version, about = "Numerical experiments for focusing NLS Gibbs measures with an L2 cutoff")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples of the truncated Gaussian measure
    Sample(Flags),
    /// Smallest Hessian eigenvalue of the regularized Hamiltonian at a sample
    Hessian(Flags),
    /// Convexity scan: searched constant, Lambda, battery minimum, LS bound
    ConvexityScan(Flags),
    /// Two-sided log-Sobolev bracket for a single mode
    LsiBracket(Flags),
    /// Optimize the variational (Boue-Dupuis) objective over a drift class
    BdOptimize(Flags),
    /// Transfer check for an exact optimizer and indicator observables
    BdTransfer(Flags),
    /// Blow-up scan along the concentrating family
    BlowupScan(Flags),
    /// Both routes to the Hessian of the log-partition
    HessianOfV(Flags),
    /// Heat-regularized log-partition along a time grid
    VtScan(Flags),
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    p: Option<String>,
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long = "Lambda")]
    lambda: Option<String>,
    #[arg(long = "R")]
    r: Option<String>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long)]
    eps0: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Truncation (`auto` for blowup-scan)
    #[arg(long = "N")]
    n: Option<String>,
    /// Comma-separated levels
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    oversampling: Option<String>,
    /// Monte Carlo sample count
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// jsonl, csv or both
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated heat times (vt-scan)
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Slope of the linear potential (bd-optimize, bd-transfer)
    #[arg(long)]
    a: Option<String>,
    /// linear, soft or smoothed (bd-optimize)
    #[arg(long)]
    potential: Option<String>,
    /// deterministic_constant, deterministic_time_dependent or linear_feedback
    #[arg(long)]
    drift: Option<String>,
    /// none, sharp or polynomial (lsi-bracket)
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    focusing: Option<String>,
    #[arg(long = "n_r")]
    n_r: Option<String>,
    #[arg(long = "n_theta")]
    n_theta: Option<String>,
    #[arg(long = "chain_steps")]
    chain_steps: Option<String>,
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("p", &self.p),
            ("K", &self.k),
            ("Lambda", &self.lambda),
            ("R", &self.r),
            ("L", &self.l),
            ("eps0", &self.eps0),
            ("sigma", &self.sigma),
            ("N", &self.n),
            ("M", &self.m),
            ("oversampling", &self.oversampling),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
            ("t", &self.t),
            ("epochs", &self.epochs),
            ("a", &self.a),
            ("potential", &self.potential),
            ("drift", &self.drift),
            ("cutoff", &self.cutoff),
            ("focusing", &self.focusing),
            ("n_r", &self.n_r),
            ("n_theta", &self.n_theta),
            ("chain_steps", &self.chain_steps),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

impl Command {
    fn split(&self) -> (&'static str, &Flags) {
        match self {
            Command::Sample(f) => ("sample", f),
            Command::Hessian(f) => ("hessian", f),
            Command::ConvexityScan(f) => ("convexity-scan", f),
            Command::LsiBracket(f) => ("lsi-bracket", f),
            Command::BdOptimize(f) => ("bd-optimize", f),
            Command::BdTransfer(f) => ("bd-transfer", f),
            Command::BlowupScan(f) => ("blowup-scan", f),
            Command::HessianOfV(f) => ("hessian-of-v", f),
            Command::VtScan(f) => ("vt-scan", f),
        }
    }
}

fn resolve(experiment: &str, flags: &Flags) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::defaults_for(experiment);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        c.apply_file(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    }
    for (k, v) in flags.pairs() {
        c.set(k, v).map_err(|e| ConfigError(format!("--{k}: {e}")))?;
    }
    validate_config(&c)?;
    Ok(c)
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("GIBBS_LSI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError(format!("GIBBS_LSI_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, flags) = cli.command.split();
    let config = match init_threads().and_then(|_| resolve(experiment, flags)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gibbs-lsi: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::run(&config) {
        Ok(report) => {
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("{} check {}: {}", if c.hard { "FAILED hard" } else { "failed soft" }, c.name, c.detail);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(run::RunError::Config(e)) => {
            eprintln!("gibbs-lsi: configuration error: {e}");
            ExitCode::from(2)
        }
        Err(run::RunError::Failed(e)) => {
            eprintln!("gibbs-lsi: {e}");
            ExitCode::from(1)
        }
    }
}
