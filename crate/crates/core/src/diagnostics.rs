//! Measurements on finished runs: tail fits, growth rates, rescaling and Dirac formation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{exclusive_suffix, Mesh};
use crate::kinetic::{cdf, tail_mass_at_node, DensityField};

/// Survival values at or below this multiple of `EPSILON * mass` count as underflow.
const UNDERFLOW_FACTOR: f64 = 64.0;

/// Least-squares line `y = slope x + intercept` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    if ys.iter().all(|y| *y == ys[0]) {
        return Ok(LineFit {
            slope: 0.0,
            intercept: ys[0],
            r_squared: 1.0,
        });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptyWindow);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if sst == 0.0 {
        if sse == 0.0 { 1.0 } else { 0.0 }
    } else {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub theta_hat: f64,
    pub k_hat: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// `mass - F` at every node, summed from the top so small tails keep their precision.
pub fn survival(f: &DensityField) -> Vec<f64> {
    let m = f.nodal_masses();
    exclusive_suffix(&m)
        .iter()
        .zip(&m)
        .map(|(above, own)| above + 0.5 * own)
        .collect()
}

/// Fits `mass - F ~ k z^{-1/theta}` on the nodes inside `window`.
pub fn fit_pareto_tail(cdf: &[f64], mass: f64, mesh: &Mesh, window: (f64, f64)) -> Result<TailFit> {
    let tail: Vec<f64> = cdf.iter().map(|c| mass - c).collect();
    fit_survival_tail(&tail, mass, mesh, window)
}

/// As [`fit_pareto_tail`] but taking the survival values directly.
pub fn fit_survival_tail(
    survival: &[f64],
    mass: f64,
    mesh: &Mesh,
    window: (f64, f64),
) -> Result<TailFit> {
    if survival.len() != mesh.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.len(),
            found: survival.len(),
        });
    }
    let (lo, hi) = window;
    let floor = UNDERFLOW_FACTOR * f64::EPSILON * mass;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (node, (&z, &s)) in mesh.nodes().iter().zip(survival).enumerate() {
        if z < lo || z > hi {
            continue;
        }
        if !(s > floor) || z <= 0.0 {
            return Err(Error::DegenerateTail { node });
        }
        xs.push(z.ln());
        ys.push(s.ln());
    }
    let line = fit_line(&xs, &ys)?;
    Ok(TailFit {
        theta_hat: -1.0 / line.slope,
        k_hat: line.intercept.exp(),
        r_squared: line.r_squared,
        window,
        points: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub values: Vec<f64>,
    /// Target nodes whose preimage fell outside the source mesh.
    pub out_of_range: usize,
}

/// `psi(x) = e^{gamma t} f(x e^{gamma t}, t)` on `target`, linear interpolation.
pub fn rescale_density(f: &DensityField, gamma: f64, t: f64, target: &Mesh) -> Rescaled {
    let scale = (gamma * t).exp();
    let mut out_of_range = 0;
    let values = target
        .nodes()
        .iter()
        .map(|&x| match f.mesh().interpolate(f.values(), x * scale) {
            Some(v) => scale * v,
            None => {
                out_of_range += 1;
                0.0
            }
        })
        .collect();
    Rescaled {
        values,
        out_of_range,
    }
}

/// `sup |F(x e^{gamma t}, t) - Phi(x)|` over the target nodes that map inside the source mesh.
pub fn rescaled_cdf_gap(f: &DensityField, gamma: f64, t: f64, target: &Mesh, profile_cdf: &[f64]) -> f64 {
    let scale = (gamma * t).exp();
    let source = cdf(f);
    target
        .nodes()
        .iter()
        .zip(profile_cdf)
        .filter_map(|(&x, p)| f.mesh().interpolate(&source, x * scale).map(|c| (c - p).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub gamma_hat: f64,
    pub window: (f64, f64),
    pub linearity_r2: f64,
    pub points: usize,
}

/// Regression of `ln Y` on `t` over the samples with `t` in `window`.
pub fn fit_growth_rate(times: &[f64], y: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    if times.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: y.len(),
        });
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (index, (&t, &v)) in times.iter().zip(y).enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveY { index });
        }
        ts.push(t);
        logs.push(v.ln());
    }
    let line = fit_line(&ts, &logs)?;
    Ok(GrowthFit {
        gamma_hat: line.slope,
        window,
        linearity_r2: line.r_squared,
        points: ts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiracMetrics {
    /// First time the mass above `z_cut` reaches 90% of the total.
    pub concentration_time: Option<f64>,
    /// Fraction of the mass above `z_cut` at the last snapshot.
    pub final_tail_mass: f64,
    pub z_cut: f64,
    pub cut_node: usize,
}

/// Formation of a point mass at `m`, measured `eps_cells` cells below the node nearest `m`.
pub fn dirac_metrics(path: &[DensityField], times: &[f64], m: f64, eps_cells: usize) -> Result<DiracMetrics> {
    if path.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: path.len(),
        });
    }
    let first = path.first().ok_or(Error::EmptyWindow)?;
    if eps_cells == 0 {
        return Err(Error::InvalidParam("eps_cells must be at least 1".into()));
    }
    let mesh = first.mesh();
    let top = mesh.nearest_node(m);
    let cut_node = top.saturating_sub(eps_cells);
    let fraction = |f: &DensityField| tail_mass_at_node(f, cut_node) / f.mass();
    let concentration_time = path
        .iter()
        .zip(times)
        .find(|(f, _)| fraction(f) >= 0.9)
        .map(|(_, &t)| t);
    Ok(DiracMetrics {
        concentration_time,
        final_tail_mass: fraction(path.last().unwrap()),
        z_cut: mesh.nodes()[cut_node],
        cut_node,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    /// Largest pointwise relative deviation before the terminal layer.
    pub core: f64,
    /// Largest pointwise relative deviation inside the terminal layer.
    pub terminal: f64,
    /// First index counted as terminal layer.
    pub cutoff: usize,
}

/// Relative deviation of `perturbed` from `reference`, with the last
/// `terminal_fraction` of the samples reported separately.
pub fn relative_deviation(reference: &[f64], perturbed: &[f64], terminal_fraction: f64) -> Result<Deviation> {
    if reference.len() != perturbed.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: perturbed.len(),
        });
    }
    if !(0.0..1.0).contains(&terminal_fraction) {
        return Err(Error::InvalidParam(format!(
            "terminal fraction must lie in [0, 1), got {terminal_fraction}"
        )));
    }
    let n = reference.len();
    let cutoff = ((1.0 - terminal_fraction) * n as f64).floor() as usize;
    let rel = |i: usize| {
        let r = reference[i];
        if r == 0.0 && perturbed[i] == 0.0 {
            0.0
        } else {
            (perturbed[i] - r).abs() / r.abs()
        }
    };
    Ok(Deviation {
        core: (0..cutoff).map(rel).fold(0.0, f64::max),
        terminal: (cutoff..n).map(rel).fold(0.0, f64::max),
        cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Spacing};
    use crate::kinetic::{frechet_cdf, frechet_initial_density};
    use std::sync::Arc;

    #[test]
    fn exact_power_tail() {
        let mesh = build_mesh(Spacing::Logarithmic, 1e-2, 100.0, 401).unwrap();
        let f: Vec<f64> = mesh.nodes().iter().map(|z| 1.0 - 0.05 * z.powi(-2)).collect();
        let fit = fit_pareto_tail(&f, 1.0, &mesh, (1.0, 10.0)).unwrap();
        assert!((fit.theta_hat - 0.5).abs() < 1e-10);
        assert!((fit.k_hat - 0.05).abs() < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn frechet_tail_improves_to_the_right() {
        let mesh = build_mesh(Spacing::Logarithmic, 1e-2, 1e3, 1001).unwrap();
        let f: Vec<f64> = mesh.nodes().iter().map(|&z| frechet_cdf(z, 0.05, 0.5)).collect();
        let near = fit_pareto_tail(&f, 1.0, &mesh, (0.2, 2.0)).unwrap();
        let far = fit_pareto_tail(&f, 1.0, &mesh, (2.0, 20.0)).unwrap();
        assert!((far.theta_hat - 0.5).abs() < (near.theta_hat - 0.5).abs());
        assert!((far.k_hat - 0.05).abs() < (near.k_hat - 0.05).abs());
        assert!((far.theta_hat - 0.5).abs() < 1e-3);
    }

    #[test]
    fn no_tail_is_degenerate() {
        let mesh = build_mesh(Spacing::Logarithmic, 1e-2, 1e2, 101).unwrap();
        let f = vec![1.0; 101];
        assert!(matches!(
            fit_pareto_tail(&f, 1.0, &mesh, (1.0, 10.0)),
            Err(Error::DegenerateTail { .. })
        ));
        assert_eq!(fit_pareto_tail(&f, 1.0, &mesh, (2e2, 3e2)), Err(Error::EmptyWindow));
    }

    #[test]
    fn survival_matches_cdf_complement() {
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 601).unwrap());
        let f = frechet_initial_density(mesh, 0.05, 0.5).unwrap();
        let c = cdf(&f);
        for (s, c) in survival(&f).iter().zip(&c) {
            assert!((s + c - f.mass()).abs() < 1e-14);
        }
    }

    #[test]
    fn growth_rate_examples() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 2.0).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (0.04245 * t).exp()).collect();
        let fit = fit_growth_rate(&t, &y, (0.0, 200.0)).unwrap();
        assert!((fit.gamma_hat - 0.04245).abs() < 1e-12);
        assert!((fit.linearity_r2 - 1.0).abs() < 1e-12);

        let lin: Vec<f64> = t.iter().map(|t| 1.0 + t).collect();
        assert!(fit_growth_rate(&t, &lin, (0.0, 200.0)).unwrap().linearity_r2 < 0.95);

        let flat = vec![2.5; t.len()];
        let fit = fit_growth_rate(&t, &flat, (0.0, 200.0)).unwrap();
        assert_eq!(fit.gamma_hat, 0.0);
        assert_eq!(fit.linearity_r2, 1.0);

        let mut bad = y.clone();
        bad[10] = 0.0;
        assert_eq!(fit_growth_rate(&t, &bad, (0.0, 200.0)), Err(Error::NonPositiveY { index: 10 }));
    }

    #[test]
    fn rescaling() {
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 2001).unwrap());
        let f = frechet_initial_density(mesh.clone(), 0.05, 0.5).unwrap();
        let same = rescale_density(&f, 0.0, 10.0, &mesh);
        assert_eq!(same.out_of_range, 0);
        for (a, b) in same.values.iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let target = build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 2001).unwrap();
        let moved = rescale_density(&f, 0.05, 20.0, &target);
        assert!(moved.out_of_range > 0);
        let mass = target.integrate(&moved.values).unwrap();
        // nodes mapped past z_max carry no mass, and nothing lives below 1e-3 e
        assert!((mass - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dirac_examples() {
        let mesh = Arc::new(build_mesh(Spacing::Linear, 0.0, 1.0, 201).unwrap());
        let mut v = vec![0.0; 201];
        v[100] = 200.0;
        let point = DensityField::new(mesh.clone(), v).unwrap();
        let m = dirac_metrics(std::slice::from_ref(&point), &[0.0], 0.5, 2).unwrap();
        assert_eq!(m.concentration_time, Some(0.0));
        assert_eq!(m.cut_node, 98);

        let flat = DensityField::new(mesh.clone(), vec![1.0; 201]).unwrap();
        let m = dirac_metrics(&[flat.clone(), flat], &[0.0, 1.0], 0.5, 2).unwrap();
        assert_eq!(m.concentration_time, None);
    }

    #[test]
    fn deviation_excludes_terminal_layer() {
        let a = vec![1.0; 10];
        let mut b = vec![1.01; 10];
        b[9] = 2.0;
        let d = relative_deviation(&a, &b, 0.1).unwrap();
        assert_eq!(d.cutoff, 9);
        assert!((d.core - 0.01).abs() < 1e-12);
        assert!((d.terminal - 1.0).abs() < 1e-12);
    }
}
