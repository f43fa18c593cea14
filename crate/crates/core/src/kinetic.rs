//! Boltzmann-type transport of the agent density.
//!
//! When two agents meet, the less knowledgeable one jumps to the other's
//! level. On the mesh the density evolves by
//!
//! ```text
//! df_i/dt = f_i * ( L[(a + b a_i) f]_i - U[(a_i + b a) f]_i )
//! ```
//!
//! where `L` and `U` are the half-weight running integrals of [`Mesh`] and `b`
//! is the symmetric-meetings probability. The two operators are exact
//! adjoints, so mass is conserved to roundoff, and every explicit stage
//! moves mass upwards only: tail masses and the first moment never decrease.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::grid::{exclusive_prefix, exclusive_suffix, Mesh, TimeAxis};

/// Values at or above this (relative to the largest value) count as non-negative.
pub const POSITIVITY_TOL: f64 = 1e-13;

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Agent density `f(z_i)` on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    mass: f64,
}

impl DensityField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.len(), values.len())?;
        check_finite(&values)?;
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { node, value });
        }
        let mass = mesh.integrate(&values)?;
        if mass <= 0.0 {
            return Err(Error::InvalidParam("density has zero mass".into()));
        }
        Ok(DensityField { mesh, values, mass })
    }

    fn from_step(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        let scale = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < -POSITIVITY_TOL * scale)
        {
            return Err(Error::PositivityViolation { node, value });
        }
        let mass = mesh.integrate(&values)?;
        Ok(DensityField { mesh, values, mass })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Quadrature masses `w_i f_i`.
    pub fn nodal_masses(&self) -> Vec<f64> {
        self.mesh
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, f)| w * f)
            .collect()
    }

    /// Same shape scaled to total mass `target`.
    pub fn renormalized(&self, target: f64) -> Result<Self> {
        let factor = target / self.mass;
        DensityField::new(
            self.mesh.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Fraction of time spent learning, `s(z_i)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl StrategyField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.len(), values.len())?;
        check_finite(&values)?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParam(format!("strategy value {v} outside [0, 1]")));
        }
        Ok(StrategyField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.len()];
        StrategyField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// How the meeting rate depends on the learning effort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearningTech {
    /// `alpha(s) = alpha0 * s^n` with `n` in `(0, 1)`.
    PowerLaw { alpha0: f64, n: f64 },
    /// `alpha(s) = alpha0` regardless of effort.
    ConstantRate { alpha0: f64 },
    /// A fixed rate per mesh node, independent of effort.
    SpatialRule(Vec<f64>),
}

impl LearningTech {
    /// Power law with `n = 0` folded into the constant-rate case.
    pub fn power_law(alpha0: f64, n: f64) -> Result<Self> {
        let tech = if n == 0.0 {
            LearningTech::ConstantRate { alpha0 }
        } else {
            LearningTech::PowerLaw { alpha0, n }
        };
        tech.validate()?;
        Ok(tech)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearningTech::PowerLaw { alpha0, n } => {
                if !(alpha0.is_finite() && *alpha0 > 0.0) {
                    return Err(Error::InvalidTech(format!("alpha0 must be positive, got {alpha0}")));
                }
                if !(0.0..1.0).contains(n) {
                    return Err(Error::InvalidTech(format!("n must lie in [0, 1), got {n}")));
                }
            }
            LearningTech::ConstantRate { alpha0 } => {
                if !(alpha0.is_finite() && *alpha0 >= 0.0) {
                    return Err(Error::InvalidTech(format!(
                        "constant rate must be non-negative, got {alpha0}"
                    )));
                }
            }
            LearningTech::SpatialRule(table) => {
                if let Some(a) = table.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                    return Err(Error::InvalidTech(format!("tabulated rate {a} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Meeting rate at `node` for effort `s`.
    pub fn rate(&self, s: f64, node: usize) -> f64 {
        match self {
            LearningTech::PowerLaw { alpha0, n } => alpha0 * s.powf(*n),
            LearningTech::ConstantRate { alpha0 } => *alpha0,
            LearningTech::SpatialRule(table) => table[node],
        }
    }

    pub fn alpha_at_nodes(&self, strategy: &[f64]) -> Vec<f64> {
        strategy
            .iter()
            .enumerate()
            .map(|(i, &s)| self.rate(s, i))
            .collect()
    }

    /// Upper bound of the rate over all efforts and nodes.
    pub fn max_rate(&self) -> f64 {
        match self {
            LearningTech::PowerLaw { alpha0, .. } | LearningTech::ConstantRate { alpha0 } => *alpha0,
            LearningTech::SpatialRule(table) => table.iter().fold(0.0, |a, &b| a.max(b)),
        }
    }
}

/// Time derivative of the density under the collision operator.
pub fn collision_rhs(f: &DensityField, alpha: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_len(f.values.len(), alpha.len())?;
    check_finite(alpha)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParam(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(rhs_unchecked(f.mesh.weights(), &f.values, alpha, beta))
}

fn rhs_unchecked(weights: &[f64], f: &[f64], alpha: &[f64], beta: f64) -> Vec<f64> {
    let m: Vec<f64> = weights.iter().zip(f).map(|(w, f)| w * f).collect();
    let am: Vec<f64> = m.iter().zip(alpha).map(|(m, a)| m * a).collect();
    let below = exclusive_prefix(&m);
    let above = exclusive_suffix(&m);
    let below_a = exclusive_prefix(&am);
    let above_a = exclusive_suffix(&am);
    (0..f.len())
        .map(|i| {
            let lower = below[i] + 0.5 * m[i];
            let upper = above[i] + 0.5 * m[i];
            let lower_a = below_a[i] + 0.5 * am[i];
            let upper_a = above_a[i] + 0.5 * am[i];
            let gain = lower_a + beta * alpha[i] * lower;
            let loss = alpha[i] * upper + beta * upper_a;
            f[i] * (gain - loss)
        })
        .collect()
}

/// Explicit time integrator for the density.
///
/// The SSP Runge-Kutta schemes are convex combinations of forward Euler
/// stages, so they keep every property a single Euler stage has (positivity,
/// conservation, upward transport) under the same step bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ForwardEuler,
    SspRk2,
    #[default]
    SspRk3,
}

fn check_step_bound(f: &DensityField, alpha: &[f64], beta: f64, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
    }
    let max_alpha = alpha.iter().fold(0.0f64, |a, &b| a.max(b));
    let bound = dt * max_alpha * (1.0 + beta) * f.mass;
    if bound >= 1.0 {
        return Err(Error::InvalidParam(format!(
            "dt * max(alpha) * (1 + beta) * mass = {bound} violates the positivity bound 1"
        )));
    }
    Ok(())
}

/// One forward Euler step `f + dt * rhs`.
pub fn step_density(f: &DensityField, alpha: &[f64], beta: f64, dt: f64) -> Result<DensityField> {
    step_density_with(f, alpha, beta, dt, Integrator::ForwardEuler)
}

pub fn step_density_with(
    f: &DensityField,
    alpha: &[f64],
    beta: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<DensityField> {
    collision_rhs(f, alpha, beta)?;
    check_step_bound(f, alpha, beta, dt)?;
    let w = f.mesh.weights();
    let euler = |u: &[f64]| -> Result<Vec<f64>> {
        let rhs = rhs_unchecked(w, u, alpha, beta);
        let next: Vec<f64> = u.iter().zip(&rhs).map(|(u, r)| u + dt * r).collect();
        DensityField::from_step(f.mesh.clone(), next).map(|d| d.values)
    };
    let values = match integrator {
        Integrator::ForwardEuler => euler(&f.values)?,
        Integrator::SspRk2 => {
            let u1 = euler(&f.values)?;
            let u2 = euler(&u1)?;
            combine(&f.values, &u2, 0.5)
        }
        Integrator::SspRk3 => {
            let u1 = euler(&f.values)?;
            let u2 = combine(&f.values, &euler(&u1)?, 0.25);
            combine(&f.values, &euler(&u2)?, 2.0 / 3.0)
        }
    };
    DensityField::from_step(f.mesh.clone(), values)
}

/// `(1 - c) a + c b`
fn combine(a: &[f64], b: &[f64], c: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a + c * (b - a)).collect()
}

/// Evolves `f0` with frozen per-node rates and returns every snapshot.
pub fn simulate_density(
    f0: &DensityField,
    alpha: &[f64],
    beta: f64,
    time: &TimeAxis,
    integrator: Integrator,
) -> Result<Vec<DensityField>> {
    let mut path = Vec::with_capacity(time.n_steps() + 1);
    path.push(f0.clone());
    for _ in 0..time.n_steps() {
        let next = step_density_with(path.last().unwrap(), alpha, beta, time.dt(), integrator)?;
        path.push(next);
    }
    Ok(path)
}

/// Cumulative distribution: the lower running integral of `f`.
pub fn cdf(f: &DensityField) -> Vec<f64> {
    let m = f.nodal_masses();
    exclusive_prefix(&m)
        .iter()
        .zip(&m)
        .map(|(b, m)| b + 0.5 * m)
        .collect()
}

/// Closed-form solution of `dF/dt = -alpha0 (1 - F) F` applied pointwise.
pub fn evolve_cdf_constant_alpha(f0_cdf: &[f64], mass: f64, alpha0: f64, t: f64) -> Result<Vec<f64>> {
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::OracleDomain { mass });
    }
    if alpha0 < 0.0 {
        return Err(Error::InvalidParam(format!("alpha0 must be non-negative, got {alpha0}")));
    }
    check_finite(f0_cdf)?;
    let growth = (alpha0 * t).exp();
    Ok(f0_cdf
        .iter()
        .map(|&f| {
            let f = f.clamp(0.0, 1.0);
            if f == 0.0 {
                0.0
            } else {
                f / (f + (1.0 - f) * growth)
            }
        })
        .collect())
}

pub fn first_moment(f: &DensityField) -> f64 {
    f.mesh
        .nodes()
        .iter()
        .zip(f.nodal_masses())
        .map(|(z, m)| z * m)
        .sum()
}

/// Mass above a knowledge level, measured at the nearest node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailMass {
    pub value: f64,
    pub node: usize,
    pub z_node: f64,
}

pub fn tail_mass(f: &DensityField, z0: f64) -> TailMass {
    let node = f.mesh.nearest_node(z0);
    TailMass {
        value: tail_mass_at_node(f, node),
        node,
        z_node: f.mesh.nodes()[node],
    }
}

/// Upper half-weight running integral at `node`.
pub fn tail_mass_at_node(f: &DensityField, node: usize) -> f64 {
    let m = f.nodal_masses();
    0.5 * m[node] + m[node + 1..].iter().sum::<f64>()
}

/// Frechet density with CDF `exp(-k z^{-1/theta})`, renormalized to unit mass on the mesh.
pub fn frechet_initial_density(mesh: Arc<Mesh>, k: f64, theta: f64) -> Result<DensityField> {
    if !(k > 0.0 && theta > 0.0 && k.is_finite() && theta.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "Frechet density needs k > 0 and theta > 0, got ({k}, {theta})"
        )));
    }
    if mesh.z_min() <= 0.0 {
        return Err(Error::InvalidParam("Frechet density needs z_min > 0".into()));
    }
    let values = mesh
        .nodes()
        .iter()
        .map(|&z| frechet_pdf(z, k, theta))
        .collect();
    DensityField::new(mesh, values)?.renormalized(1.0)
}

pub fn frechet_pdf(z: f64, k: f64, theta: f64) -> f64 {
    let u = k * z.powf(-1.0 / theta);
    (k / theta) * z.powf(-(theta + 1.0) / theta) * (-u).exp()
}

pub fn frechet_cdf(z: f64, k: f64, theta: f64) -> f64 {
    (-k * z.powf(-1.0 / theta)).exp()
}

/// `1 - frechet_cdf`, accurate deep in the tail.
pub fn frechet_survival(z: f64, k: f64, theta: f64) -> f64 {
    -(-k * z.powf(-1.0 / theta)).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Spacing};

    fn linear(n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Spacing::Linear, 0.0, 1.0, n).unwrap())
    }

    #[test]
    fn no_interaction_means_no_motion() {
        let mesh = linear(21);
        let f = DensityField::new(mesh.clone(), (0..21).map(|i| 1.0 + i as f64).collect()).unwrap();
        let rhs = collision_rhs(&f, &[0.0; 21], 0.7).unwrap();
        assert!(rhs.iter().all(|r| *r == 0.0));
        let next = step_density(&f, &[0.0; 21], 0.0, 10.0).unwrap();
        assert_eq!(next.values(), f.values());
    }

    #[test]
    fn isolated_point_mass_is_stationary() {
        let mesh = linear(11);
        let mut v = vec![0.0; 11];
        v[4] = 3.0;
        let f = DensityField::new(mesh, v).unwrap();
        for beta in [0.0, 0.5, 1.0] {
            let alpha: Vec<f64> = (0..11).map(|i| 0.1 * i as f64).collect();
            assert!(collision_rhs(&f, &alpha, beta).unwrap().iter().all(|r| r.abs() < 1e-15));
            let mut g = f.clone();
            for _ in 0..50 {
                g = step_density_with(&g, &alpha, beta, 0.1, Integrator::SspRk3).unwrap();
            }
            assert_eq!(g.values(), f.values());
        }
    }

    /// Brute-force pairwise sum for a two-point system: every ordered pair of
    /// agents (including an agent with itself, weighted 1/2 on each side) is
    /// visited and the lower one adopts the higher level at rate alpha, the
    /// higher one gains with rate beta * alpha of the partner.
    fn two_point_oracle(m: f64, alpha0: f64, beta: f64) -> (f64, f64) {
        let masses = [m, m];
        let mut rate = [0.0f64; 2];
        for i in 0..2 {
            for j in 0..2 {
                let c = if i == j { 0.5 } else { 1.0 };
                if j > i || i == j {
                    // i meets a partner at or above it: loss
                    rate[i] -= c * masses[i] * masses[j] * (alpha0 + beta * alpha0);
                }
                if j < i || i == j {
                    // partner below i lands on i's level: gain
                    rate[i] += c * masses[i] * masses[j] * (alpha0 + beta * alpha0);
                }
            }
        }
        (rate[0], rate[1])
    }

    #[test]
    fn two_point_masses_match_pairwise_sum() {
        let mesh = linear(11);
        let (a, b) = (3usize, 8usize);
        let m = 0.4;
        let mut v = vec![0.0; 11];
        v[a] = m / mesh.weights()[a];
        v[b] = m / mesh.weights()[b];
        let f = DensityField::new(mesh.clone(), v).unwrap();
        let alpha0 = 0.7;
        for beta in [0.0, 1.0] {
            let rhs = collision_rhs(&f, &[alpha0; 11], beta).unwrap();
            let (lo, hi) = two_point_oracle(m, alpha0, beta);
            let got_lo = rhs[a] * mesh.weights()[a];
            let got_hi = rhs[b] * mesh.weights()[b];
            assert!((got_lo - lo).abs() < 1e-14, "{got_lo} vs {lo}");
            assert!((got_hi - hi).abs() < 1e-14, "{got_hi} vs {hi}");
            let expected = (1.0 + beta) * alpha0 * m * m;
            assert!((got_hi - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn step_rejects_oversized_dt() {
        let mesh = linear(11);
        let f = DensityField::new(mesh, vec![1.0; 11]).unwrap();
        assert!(matches!(
            step_density(&f, &[1.0; 11], 1.0, 0.6),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn cdf_and_moments_of_uniform_density() {
        let mesh = linear(101);
        let f = DensityField::new(mesh.clone(), vec![1.0; 101]).unwrap();
        let cdf = cdf(&f);
        assert!((cdf[50] - 0.5).abs() < 1e-14);
        assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
        assert!((first_moment(&f) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn point_mass_moment() {
        let mesh = linear(11);
        let mut v = vec![0.0; 11];
        v[6] = 2.0;
        let f = DensityField::new(mesh.clone(), v).unwrap();
        let m = f.mass();
        assert!((first_moment(&f) - m * 0.6).abs() < 1e-15);
    }

    #[test]
    fn tail_mass_endpoints() {
        let mesh = linear(101);
        // vanishes at both ends
        let v: Vec<f64> = mesh.nodes().iter().map(|z| z * (1.0 - z)).collect();
        let f = DensityField::new(mesh.clone(), v).unwrap();
        assert_eq!(tail_mass(&f, 0.0).value, f.mass());
        assert_eq!(tail_mass(&f, 1.0).value, 0.0);
        assert_eq!(tail_mass(&f, 0.503).node, 50);
    }

    #[test]
    fn logistic_oracle() {
        assert_eq!(evolve_cdf_constant_alpha(&[0.0, 1.0], 1.0, 2.0, 7.0).unwrap(), vec![0.0, 1.0]);
        let got = evolve_cdf_constant_alpha(&[0.5], 1.0, 1.0, 3f64.ln()).unwrap()[0];
        assert!((got - 0.25).abs() < 1e-15);
        // finite-difference derivative at t = 0
        let (f0, a0, h) = (0.3, 0.8, 1e-6);
        let fp = evolve_cdf_constant_alpha(&[f0], 1.0, a0, h).unwrap()[0];
        let fm = evolve_cdf_constant_alpha(&[f0], 1.0, a0, -h).unwrap()[0];
        assert!(((fp - fm) / (2.0 * h) + a0 * f0 * (1.0 - f0)).abs() < 1e-6);
        assert!(matches!(
            evolve_cdf_constant_alpha(&[0.5], 2.0, 1.0, 1.0),
            Err(Error::OracleDomain { .. })
        ));
    }

    #[test]
    fn frechet_initial_datum() {
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 1e3, 1201).unwrap());
        let f = frechet_initial_density(mesh.clone(), 0.05, 0.5).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-12);
        let one = mesh.nearest_node(1.0);
        assert!((mesh.nodes()[one] - 1.0).abs() < 1e-12);
        // closed-form CDF exp(-k) at z = 1
        assert!((frechet_cdf(1.0, 0.05, 0.5) - 0.951229).abs() < 1e-6);
        assert!((cdf(&f)[one] - (-0.05f64).exp()).abs() < 2e-4);
        // Pareto tail constant of the closed form
        for z in [1e2, 1e3, 1e4] {
            let tail = frechet_survival(z, 0.05, 0.5) * z.powf(2.0);
            assert!((tail - 0.05).abs() < 0.05 * 0.05 / (z * z) + 1e-9);
        }
        assert!(frechet_initial_density(mesh, -1.0, 0.5).is_err());
    }

    #[test]
    fn spatial_rule_and_power_law() {
        let tech = LearningTech::power_law(2.0, 0.5).unwrap();
        assert!((tech.rate(0.25, 0) - 1.0).abs() < 1e-15);
        assert_eq!(LearningTech::power_law(2.0, 0.0).unwrap(), LearningTech::ConstantRate { alpha0: 2.0 });
        assert!(LearningTech::power_law(2.0, 1.2).is_err());
        assert!(LearningTech::SpatialRule(vec![0.2, 1.5]).validate().is_err());
    }
}
