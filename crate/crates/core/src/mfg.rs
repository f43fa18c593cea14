//! Forward-backward fixed point for the coupled density / value system.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::TimeAxis;
use crate::hjb::{solve_hjb_backward, GainField, HjbScheme, ValueField};
use crate::kinetic::{
    cdf, same_mesh, step_density_with, DensityField, Integrator, LearningTech, StrategyField,
};

/// Per-capita production `Y = int (1 - s) z f dz`.
pub fn production(f: &DensityField, s: &StrategyField) -> Result<f64> {
    if !same_mesh(f.mesh(), s.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let integrand: Vec<f64> = f
        .mesh()
        .nodes()
        .iter()
        .zip(f.values())
        .zip(s.values())
        .map(|((z, f), s)| (1.0 - s) * z * f)
        .collect();
    f.mesh().integrate(&integrand)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfgOptions {
    /// Discount rate.
    pub r: f64,
    /// Probability that the better-informed party also learns.
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new strategy in each Picard update, in (0, 1].
    pub relaxation: f64,
    pub integrator: Integrator,
    pub scheme: HjbScheme,
}

impl Default for MfgOptions {
    fn default() -> Self {
        MfgOptions {
            r: 0.06,
            beta: 0.0,
            tol: 1e-6,
            max_iter: 100,
            relaxation: 1.0,
            integrator: Integrator::default(),
            scheme: HjbScheme::default(),
        }
    }
}

impl MfgOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::InvalidParam(format!("r must be non-negative, got {}", self.r)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParam(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParam(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Change between consecutive Picard iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// Largest sup-norm change of the CDF over all time steps.
    pub delta_f: f64,
    /// Largest sup-norm change of `V / (1 + z)` over all time steps.
    pub delta_v: f64,
}

#[derive(Debug, Clone)]
pub struct MfgSolution {
    pub density_path: Vec<DensityField>,
    pub value_path: Vec<ValueField>,
    pub strategy_path: Vec<StrategyField>,
    pub gain_path: Vec<GainField>,
    pub production_series: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// One entry per iteration; the first compares against an empty state and is infinite.
    pub residuals: Vec<Residual>,
}

/// Forward sweep of the density against a fixed strategy path.
pub fn forward_sweep(
    f0: &DensityField,
    strategies: &[StrategyField],
    tech: &LearningTech,
    beta: f64,
    time: &TimeAxis,
    integrator: Integrator,
) -> Result<Vec<DensityField>> {
    check_len(time.n_steps() + 1, strategies.len())?;
    let mut path = Vec::with_capacity(time.n_steps() + 1);
    path.push(f0.clone());
    for s in &strategies[..time.n_steps()] {
        let alpha = tech.alpha_at_nodes(s.values());
        let next = step_density_with(path.last().unwrap(), &alpha, beta, time.dt(), integrator)?;
        path.push(next);
    }
    Ok(path)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Full-horizon Picard iteration starting from `S = 0`.
#[allow(clippy::type_complexity)]
pub fn solve_mfg(
    f0: &DensityField,
    tech: &LearningTech,
    time: &TimeAxis,
    options: &MfgOptions,
) -> Result<MfgSolution> {
    options.validate()?;
    tech.validate()?;
    let mesh = f0.mesh().clone();
    let n = time.n_steps();
    let terminal = ValueField::zeros(mesh.clone());
    let mut strategies = vec![StrategyField::zeros(mesh.clone()); n + 1];
    // CDFs and weighted values of the last iterate
    let mut previous: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    let mut residuals = Vec::new();

    for iteration in 1..=options.max_iter {
        let density_path = forward_sweep(f0, &strategies, tech, options.beta, time, options.integrator)?;
        let sweep = solve_hjb_backward(&density_path, &terminal, tech, options.r, time, options.scheme)?;

        let cdfs: Vec<Vec<f64>> = density_path.iter().map(cdf).collect();
        let weighted: Vec<Vec<f64>> = sweep.values.iter().map(ValueField::weighted).collect();
        let residual = match &previous {
            None => Residual {
                delta_f: f64::INFINITY,
                delta_v: f64::INFINITY,
            },
            Some((old_cdfs, old_values)) => Residual {
                delta_f: cdfs.iter().zip(old_cdfs).fold(0.0, |m, (a, b)| m.max(sup_diff(a, b))),
                delta_v: weighted.iter().zip(old_values).fold(0.0, |m, (a, b)| m.max(sup_diff(a, b))),
            },
        };
        log::debug!(
            "picard iteration {iteration}: dF = {:.3e}, dV = {:.3e}",
            residual.delta_f,
            residual.delta_v
        );
        residuals.push(residual);
        let converged = residual.delta_f < options.tol && residual.delta_v < options.tol;

        if options.relaxation < 1.0 && previous.is_some() {
            let w = options.relaxation;
            strategies = strategies
                .iter()
                .zip(&sweep.strategies)
                .map(|(old, new)| {
                    let mixed = old
                        .values()
                        .iter()
                        .zip(new.values())
                        .map(|(o, n)| ((1.0 - w) * o + w * n).clamp(0.0, 1.0))
                        .collect();
                    StrategyField::new(mesh.clone(), mixed)
                })
                .collect::<Result<_>>()?;
        } else {
            strategies = sweep.strategies.clone();
        }

        if converged || iteration == options.max_iter {
            // Report the strategy the density path was driven by, together with the
            // values it produced.
            let production_series = density_path
                .iter()
                .zip(&sweep.strategies)
                .map(|(f, s)| production(f, s))
                .collect::<Result<_>>()?;
            if !converged {
                log::warn!("picard iteration stopped after {iteration} iterations without converging");
            }
            return Ok(MfgSolution {
                density_path,
                value_path: sweep.values,
                strategy_path: sweep.strategies,
                gain_path: sweep.gains,
                production_series,
                iterations: iteration,
                converged,
                residuals,
            });
        }
        previous = Some((cdfs, weighted));
    }
    unreachable!("max_iter is at least one")
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub density: DensityField,
    /// Mass change introduced by the raw perturbation, before any renormalization.
    pub raw_mass_change: f64,
    pub renormalized: bool,
}

/// `f0 + amplitude (1 - z) sin(freq pi z)` on `[a, b]`.
pub fn perturb_density(
    f0: &DensityField,
    amplitude: f64,
    freq: f64,
    window: (f64, f64),
) -> Result<Perturbation> {
    let (a, b) = window;
    if !(a <= b && amplitude.is_finite() && freq.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "invalid perturbation (amplitude {amplitude}, freq {freq}, window [{a}, {b}])"
        )));
    }
    let values: Vec<f64> = f0
        .mesh()
        .nodes()
        .iter()
        .zip(f0.values())
        .map(|(&z, &f)| {
            if (a..=b).contains(&z) {
                f + amplitude * (1.0 - z) * (freq * std::f64::consts::PI * z).sin()
            } else {
                f
            }
        })
        .collect();
    if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { node, value });
    }
    let raw = DensityField::new(f0.mesh().clone(), values)?;
    let raw_mass_change = raw.mass() - f0.mass();
    if raw_mass_change.abs() > 1e-10 {
        Ok(Perturbation {
            density: raw.renormalized(f0.mass())?,
            raw_mass_change,
            renormalized: true,
        })
    } else {
        Ok(Perturbation {
            density: raw,
            raw_mass_change,
            renormalized: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Mesh, Spacing};
    use crate::kinetic::{frechet_initial_density, simulate_density};
    use std::sync::Arc;

    fn unit(n: usize) -> (Arc<Mesh>, DensityField) {
        let mesh = Arc::new(build_mesh(Spacing::Linear, 0.0, 1.0, n).unwrap());
        let f = DensityField::new(mesh.clone(), vec![1.0; n]).unwrap();
        (mesh, f)
    }

    #[test]
    fn production_examples() {
        let (mesh, f) = unit(101);
        let s = |v: f64| StrategyField::new(mesh.clone(), vec![v; 101]).unwrap();
        assert_eq!(production(&f, &s(1.0)).unwrap(), 0.0);
        assert!((production(&f, &s(0.0)).unwrap() - 0.5).abs() < 1e-14);
        assert!((production(&f, &s(0.5)).unwrap() - 0.25).abs() < 1e-14);
    }

    fn log_setup() -> (Arc<Mesh>, DensityField, TimeAxis) {
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 121).unwrap());
        let f0 = frechet_initial_density(mesh.clone(), 0.05, 0.5).unwrap();
        (mesh, f0, TimeAxis::new(20.0, 40).unwrap())
    }

    #[test]
    fn constant_rate_converges_in_two_iterations() {
        let (_, f0, time) = log_setup();
        let tech = LearningTech::power_law(0.0849, 0.0).unwrap();
        let sol = solve_mfg(&f0, &tech, &time, &MfgOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 2);
        assert_eq!(sol.residuals[1], Residual { delta_f: 0.0, delta_v: 0.0 });

        let alpha = vec![0.0849; f0.values().len()];
        let direct = simulate_density(&f0, &alpha, 0.0, &time, Integrator::default()).unwrap();
        for (a, b) in sol.density_path.iter().zip(&direct) {
            assert!(sup_diff(a.values(), b.values()) <= 1e-12);
        }
    }

    #[test]
    fn zero_rate_keeps_density_and_matches_value_oracle() {
        let (mesh, f0, time) = log_setup();
        let tech = LearningTech::ConstantRate { alpha0: 0.0 };
        let sol = solve_mfg(&f0, &tech, &time, &MfgOptions::default()).unwrap();
        assert!(sol.density_path.iter().all(|f| f.values() == f0.values()));
        let r = 0.06;
        for (k, v) in sol.value_path.iter().enumerate() {
            let tau = time.t_final() - time.time(k);
            for (z, v) in mesh.nodes().iter().zip(v.values()) {
                let exact = z * (1.0 - (-r * tau).exp()) / r;
                assert!((v - exact).abs() / (1.0 + z) < 1e-12);
            }
        }
    }

    #[test]
    fn power_law_iteration_converges_and_is_a_fixed_point() {
        let (_, f0, time) = log_setup();
        let tech = LearningTech::power_law(0.0849, 0.3).unwrap();
        let options = MfgOptions::default();
        let sol = solve_mfg(&f0, &tech, &time, &options).unwrap();
        assert!(sol.converged, "{:?}", sol.residuals);
        let mass = f0.mass();
        for f in &sol.density_path {
            assert!((f.mass() - mass).abs() <= 1e-12 * mass);
        }
        // One more sweep on the converged strategies changes nothing material.
        let again = forward_sweep(&f0, &sol.strategy_path, &tech, 0.0, &time, options.integrator).unwrap();
        for (a, b) in again.iter().zip(&sol.density_path) {
            assert!(sup_diff(&cdf(a), &cdf(b)) < options.tol);
        }
    }

    #[test]
    fn option_validation() {
        let bad = MfgOptions { relaxation: 0.0, ..MfgOptions::default() };
        assert!(bad.validate().is_err());
        let bad = MfgOptions { beta: 1.5, ..MfgOptions::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perturbation_examples() {
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 2001).unwrap());
        let f0 = frechet_initial_density(mesh.clone(), 0.05, 0.5).unwrap();
        let same = perturb_density(&f0, 0.0, 25.0, (0.1, 1.0)).unwrap();
        assert_eq!(same.density.values(), f0.values());
        assert_eq!(same.raw_mass_change, 0.0);

        let p = perturb_density(&f0, 0.1, 25.0, (0.1, 1.0)).unwrap();
        assert!(p.raw_mass_change.abs() < 0.1 / (25.0 * std::f64::consts::PI));
        assert!((p.density.mass() - f0.mass()).abs() < 1e-12);

        let too_big = perturb_density(&f0, 50.0, 25.0, (0.1, 1.0));
        assert!(matches!(too_big, Err(Error::NegativeDensity { .. })));
    }
}
