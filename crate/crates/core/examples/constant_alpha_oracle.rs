//! Forward transport with a constant learning rate against the logistic closed form
//! `F(z, t) = F0 / (F0 + (1 - F0) e^{alpha0 t})`.

use std::sync::Arc;

use kinexus::kinetic::{cdf, evolve_cdf_constant_alpha, frechet_initial_density, simulate_density};
use kinexus::{build_mesh, Integrator, Spacing, TimeAxis};

pub fn run() -> Result<f64, Box<dyn std::error::Error>> {
    let alpha0 = 0.0849;
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e6, 1001)?);
    let f0 = frechet_initial_density(mesh.clone(), 0.05, 0.5)?;
    let time = TimeAxis::new(200.0, 400)?;
    let alpha = vec![alpha0; mesh.len()];
    let path = simulate_density(&f0, &alpha, 0.0, &time, Integrator::SspRk3)?;

    let f0_cdf = cdf(&f0);
    let mut worst = 0.0f64;
    for (k, f) in path.iter().enumerate() {
        let exact = evolve_cdf_constant_alpha(&f0_cdf, f0.mass(), alpha0, time.time(k))?;
        let err = cdf(f).iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
        if k % 100 == 0 {
            println!("t = {:6.1}  max |F - F_exact| = {err:.3e}", time.time(k));
        }
    }
    println!("worst over all snapshots: {worst:.3e}");
    Ok(worst)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
