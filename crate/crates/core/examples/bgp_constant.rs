//! Closed-form balanced-growth profile for a constant learning rate, with the
//! rescaled value function from the shooting solve.

use std::sync::Arc;

use kinexus::bgp::{bgp_constant_alpha, v_residual};
use kinexus::{build_mesh, Spacing};

pub fn run() -> Result<f64, Box<dyn std::error::Error>> {
    let (alpha0, theta, k, r) = (0.0849, 0.5, 0.05, 0.06);
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-4, 1e4, 8001)?);
    let profile = bgp_constant_alpha(alpha0, theta, k, r, mesh.clone())?;
    let v = profile.value.as_deref().expect("constant-rate profiles carry v");
    let residual = v_residual(v, &profile.density, profile.gamma, r, alpha0, &mesh)?;
    println!("gamma = {}", profile.gamma);
    println!("value equation residual {residual:.3e}");
    for x in [1e-2, 0.1, 1.0, 10.0, 100.0] {
        let i = mesh.nearest_node(x);
        println!(
            "x = {:9.3e}  Phi = {:.6}  v = {:.6}  v r / x = {:.4}",
            mesh.nodes()[i],
            profile.cdf[i],
            v[i],
            v[i] * r / mesh.nodes()[i]
        );
    }
    Ok(residual)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
