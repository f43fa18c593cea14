//! Backward value solve with learning switched off: every agent just produces,
//! so `V(z, t) = z (1 - e^{-r (T - t)}) / r`.

use std::sync::Arc;

use kinexus::hjb::solve_hjb_backward;
use kinexus::kinetic::frechet_initial_density;
use kinexus::{build_mesh, HjbScheme, LearningTech, Spacing, TimeAxis, ValueField};

pub fn run() -> Result<f64, Box<dyn std::error::Error>> {
    let r = 0.06;
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e6, 1001)?);
    let f = frechet_initial_density(mesh.clone(), 0.05, 0.5)?;
    let time = TimeAxis::new(200.0, 400)?;
    // the density does not enter when alpha = 0; freeze it
    let path = vec![f; time.n_steps() + 1];
    let tech = LearningTech::ConstantRate { alpha0: 0.0 };
    let terminal = ValueField::zeros(mesh.clone());

    let mut errors = Vec::new();
    for scheme in [HjbScheme::Exponential, HjbScheme::ExplicitEuler] {
        let sweep = solve_hjb_backward(&path, &terminal, &tech, r, &time, scheme)?;
        let mut worst = 0.0f64;
        for (k, v) in sweep.values.iter().enumerate() {
            let tau = time.t_final() - time.time(k);
            for (z, v) in mesh.nodes().iter().zip(v.values()) {
                let exact = z * (1.0 - (-r * tau).exp()) / r;
                worst = worst.max((v - exact).abs() / (1.0 + z));
            }
        }
        println!("{scheme:?}: (1+z)-weighted max error {worst:.3e}");
        errors.push(worst);
    }
    Ok(errors[0])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
