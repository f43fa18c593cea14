//! Output path from a perturbed initial density against the unperturbed one.

use std::sync::Arc;

use kinexus::diagnostics::{relative_deviation, Deviation};
use kinexus::kinetic::frechet_initial_density;
use kinexus::mfg::perturb_density;
use kinexus::{build_mesh, solve_mfg, LearningTech, MfgOptions, Spacing, TimeAxis};

pub fn run() -> Result<Deviation, Box<dyn std::error::Error>> {
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e6, 1001)?);
    let f0 = frechet_initial_density(mesh, 0.05, 0.5)?;
    let p = perturb_density(&f0, 0.1, 25.0, (0.1, 1.0))?;
    println!("raw mass change {:.3e}, renormalized = {}", p.raw_mass_change, p.renormalized);

    let time = TimeAxis::new(250.0, 500)?;
    let tech = LearningTech::power_law(0.0849, 0.3)?;
    let options = MfgOptions::default();
    let a = solve_mfg(&f0, &tech, &time, &options)?;
    let b = solve_mfg(&p.density, &tech, &time, &options)?;
    let d = relative_deviation(&a.production_series, &b.production_series, 0.1)?;
    println!("relative deviation of Y: {:.3e} before t = {}, {:.3e} after", d.core, time.time(d.cutoff), d.terminal);
    Ok(d)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
