//! Command-line front end.
//!
//! Exit codes: 0 success, 1 i/o failure or failed `check`, 2 configuration
//! error, 3 solver did not converge (outputs still written), 4 numerical failure.

pub mod check;
pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_config, Experiment};

#[derive(Debug, Parser)]
#[command(name = "kinexus", version, about = "Kinetic mean-field-game model of knowledge growth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupled transient run from a Frechet initial density.
    Simulate(RunArgs),
    /// Balanced-growth profile (constant rate, or a prescribed strategy with `experiment = "bgp-general"`).
    Bgp(RunArgs),
    /// Point-mass formation under a fixed learning rate, with and without two-way learning.
    Dirac(RunArgs),
    /// Paired runs from an unperturbed and a perturbed initial density.
    Perturb(RunArgs),
    /// Re-run the invariant suite on a finished run's outputs.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.alpha0=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Also write gnuplot scripts next to the CSVs.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Directory of a finished run.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Transient, a),
        Command::Bgp(a) => (Experiment::BgpConstant, a),
        Command::Dirac(a) => (Experiment::DiracDemo, a),
        Command::Perturb(a) => (Experiment::Perturbation, a),
        Command::Check(a) => return run_check(&a),
    };
    let mut config = match load_config(experiment, args.config.as_deref(), &args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(out) = args.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    config.output.gnuplot |= args.gnuplot;
    log::info!("running {:?} into {}", config.experiment, config.output.dir);
    let outcome = experiments::run_experiment(&config);
    let failed: Vec<&str> = outcome
        .summary
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        log::warn!("failed checks: {}", failed.join(", "));
    }
    if let Some(e) = &outcome.summary.error {
        eprintln!("error: {e}");
    }
    outcome.exit_code
}

fn run_check(args: &CheckArgs) -> i32 {
    let report = check::check_outputs(&args.out);
    for c in &report.checks {
        println!(
            "{} {} measured={:e} {:?} {:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.bound,
            c.limit
        );
    }
    for p in &report.problems {
        println!("FAIL {p}");
    }
    if report.passed() {
        0
    } else {
        1
    }
}
