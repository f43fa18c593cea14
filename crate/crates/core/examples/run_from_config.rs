//! Library use of the command-line layer: a preset plus overrides, run into a
//! directory, then the invariant suite over what was written.

use kinexus::cli::check::check_outputs;
use kinexus::cli::config::{parse_config, Experiment};
use kinexus::cli::experiments::run_experiment;

pub fn run() -> Result<i32, Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("kinexus-example-{}", std::process::id()));
    let file = "[bgp]\ntol = 1e-12\n";
    let overrides = [
        "experiment=\"bgp-general\"".to_string(),
        format!("output.dir=\"{}\"", dir.display()),
    ];
    let config = parse_config(Experiment::BgpConstant, Some(file), &overrides)?;
    let outcome = run_experiment(&config);
    println!("exit code {}, files {:?}", outcome.exit_code, outcome.summary.files);
    let report = check_outputs(&dir);
    for c in &report.checks {
        println!("{} {} = {:.3e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(outcome.exit_code)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
