//! Learning rate `1 - z` on `[0, 1]`: agents pile up at the top of the initial
//! support, faster when both parties learn from a meeting.

use std::sync::Arc;

use kinexus::diagnostics::{dirac_metrics, DiracMetrics};
use kinexus::kinetic::simulate_density;
use kinexus::{build_mesh, DensityField, Integrator, Spacing, TimeAxis};

pub fn run() -> Result<[DiracMetrics; 2], Box<dyn std::error::Error>> {
    let mesh = Arc::new(build_mesh(Spacing::Linear, 0.0, 1.0, 201)?);
    let values = mesh.nodes().iter().map(|&z| if z <= 0.5 { 2.0 } else { 0.0 }).collect();
    let f0 = DensityField::new(mesh.clone(), values)?.renormalized(1.0)?;
    let alpha: Vec<f64> = mesh.nodes().iter().map(|z| 1.0 - z).collect();
    let time = TimeAxis::new(20.0, 2000)?;
    let times = time.times();

    let mut out = Vec::new();
    for beta in [0.0, 1.0] {
        let path = simulate_density(&f0, &alpha, beta, &time, Integrator::SspRk3)?;
        let m = dirac_metrics(&path, &times, 0.5, 2)?;
        println!(
            "beta = {beta}: 90% of the mass above z = {} at t = {:?}; final fraction {:.6}",
            m.z_cut, m.concentration_time, m.final_tail_mass
        );
        out.push(m);
    }
    Ok([out[0], out[1]])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
