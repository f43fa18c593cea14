//! Growth-rate fixed point for a prescribed rescaled strategy that drops from
//! 1 to 0.5 above `x = 0.2`.

use std::sync::Arc;

use kinexus::bgp::{bgp_general, phi_residual, GeneralOptions, SigmaRule};
use kinexus::{build_mesh, LearningTech, Spacing};

pub fn run() -> Result<f64, Box<dyn std::error::Error>> {
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-4, 1e4, 8001)?);
    let tech = LearningTech::power_law(0.0849, 0.3)?;
    let theta = 0.5;
    let options = GeneralOptions::default();

    let sigma = SigmaRule::Step {
        x0: 0.2,
        low: 0.5,
        ramp: 0.5,
    };
    let profile = bgp_general(sigma, &tech, theta, mesh.clone(), &options)?;
    println!(
        "gamma = {:.7} in [{:.5}, {:.5}] after {} iterations",
        profile.gamma,
        theta * tech.rate(0.5, 0),
        theta * tech.rate(1.0, 0),
        profile.iterations
    );
    println!("tail constant {:.6}", profile.k_tail);
    println!("profile residual {:.3e}", phi_residual(&profile, &tech)?);

    let unit = bgp_general(SigmaRule::Unit, &tech, theta, mesh, &options)?;
    println!("sigma = 1 gives gamma = {} (theta alpha(1) = {})", unit.gamma, theta * tech.rate(1.0, 0));
    Ok(profile.gamma)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
