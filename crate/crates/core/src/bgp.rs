//! Balanced growth paths in the rescaled variable `x = z e^{-gamma t}`.
//!
//! Profiles are built on a mesh with `x_min > 0`. The survival function
//! `1 - Phi` is carried separately from `Phi` so the Pareto tail keeps full
//! relative precision.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{exclusive_suffix, Mesh};
use crate::kinetic::LearningTech;
use crate::ode::integrate_to;

/// Largest accepted `(1 + x)`-weighted residual of the rescaled value equation.
pub const V_RESIDUAL_TOL: f64 = 1e-4;
/// Largest accepted `(1 + x)`-weighted residual of the rescaled CDF equation.
pub const PHI_RESIDUAL_TOL: f64 = 1e-5;
/// Allowed relative deviation of the fitted tail slope from `-1 / theta`.
pub const TAIL_SLOPE_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct BgpProfile {
    pub mesh: Arc<Mesh>,
    pub gamma: f64,
    pub theta: f64,
    pub k_tail: f64,
    pub mass: f64,
    /// `Phi` at the nodes.
    pub cdf: Vec<f64>,
    /// `mass - Phi`, computed without cancellation.
    pub survival: Vec<f64>,
    /// `phi = Phi'`.
    pub density: Vec<f64>,
    /// Rescaled value `v`; only built for a constant learning rate.
    pub value: Option<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gamma_history: Vec<f64>,
}

/// `gamma = theta * int alpha(sigma) phi`, trapezoid on the mesh.
pub fn gamma_from_profile(
    phi: &[f64],
    sigma: &[f64],
    tech: &LearningTech,
    theta: f64,
    mesh: &Mesh,
) -> Result<f64> {
    if phi.len() != mesh.len() || sigma.len() != mesh.len() {
        return Err(Error::MeshMismatch);
    }
    let integrand: Vec<f64> = phi
        .iter()
        .zip(sigma)
        .enumerate()
        .map(|(i, (p, s))| tech.rate(*s, i) * p)
        .collect();
    Ok(theta * mesh.integrate(&integrand)?)
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive, got {value}")))
    }
}

fn check_rescaled_mesh(mesh: &Mesh) -> Result<()> {
    if mesh.z_min() > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam("rescaled profiles need x_min > 0".into()))
    }
}

/// Closed-form profile for a constant learning rate and unit mass.
pub fn bgp_constant_alpha(
    alpha0: f64,
    theta: f64,
    k_tail: f64,
    r: f64,
    mesh: Arc<Mesh>,
) -> Result<BgpProfile> {
    check_positive("alpha0", alpha0)?;
    check_positive("theta", theta)?;
    check_positive("k_tail", k_tail)?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParam(format!("r must be non-negative, got {r}")));
    }
    check_rescaled_mesh(&mesh)?;
    let gamma = theta * alpha0;
    if r <= gamma {
        log::warn!("r = {r} does not exceed gamma = {gamma}; the value equation may have no decaying solution");
    }
    let mut cdf = Vec::with_capacity(mesh.len());
    let mut survival = Vec::with_capacity(mesh.len());
    let mut density = Vec::with_capacity(mesh.len());
    for &x in mesh.nodes() {
        let q = k_tail * x.powf(-1.0 / theta);
        cdf.push(1.0 / (1.0 + q));
        survival.push(q / (1.0 + q));
        density.push(q / (theta * x * (1.0 + q) * (1.0 + q)));
    }
    let w = solve_w_ode(&cdf, gamma, r, alpha0, &mesh)?;
    Ok(BgpProfile {
        sigma: vec![0.0; mesh.len()],
        mesh,
        gamma,
        theta,
        k_tail,
        mass: 1.0,
        cdf,
        survival,
        density,
        value: Some(w.v),
        iterations: 0,
        converged: true,
        gamma_history: vec![gamma],
    })
}

/// Solution of the first-order equation for `W(x) = int_x^{x_max} v phi dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSolution {
    pub v: Vec<f64>,
    pub big_w: Vec<f64>,
    /// Antiderivative of `x Phi'`, anchored so that `H(x_max) = 0`.
    pub h: Vec<f64>,
    /// Integration constant matching the anchored `H`.
    pub k_const: f64,
    /// `(1 + x)`-weighted sup residual of the rescaled value equation.
    pub residual: f64,
    pub shooting_iterations: usize,
}

/// Solves `(gamma - r) W - gamma x W' = H + alpha0 Phi W + K` with `W(x_max) = 0`
/// and returns `v = -W' / phi`.
///
/// `Phi` must be a constant-rate profile, i.e. satisfy
/// `gamma x Phi' = alpha0 Phi (1 - Phi)`; it is re-integrated from its first node,
/// in `u = ln x`, outward from `x_min`. Recovering `v` from `W'` divides by
/// `phi`, which is tiny in the tail, so `v` is integrated directly through the
/// equivalent pair `gamma x v' = x + alpha0 W - (r - gamma + alpha0 (1 - Phi)) v`,
/// `W' = -v phi`. Outward is the stable direction for `v`. The start sits on the
/// bounded branch near the origin and `W(x_min)` is found by secant shooting
/// on `W(x_max)`; `K` then follows from the `W` equation at `x_max`.
pub fn solve_w_ode(
    cdf: &[f64],
    gamma: f64,
    r: f64,
    alpha0: f64,
    mesh: &Mesh,
) -> Result<WSolution> {
    if cdf.len() != mesh.len() {
        return Err(Error::MeshMismatch);
    }
    check_positive("gamma", gamma)?;
    check_positive("alpha0", alpha0)?;
    check_rescaled_mesh(mesh)?;
    let phi0 = cdf[0];
    if !(phi0 > 0.0 && phi0 < 1e-3) {
        return Err(Error::InvalidParam(format!(
            "Phi(x_min) = {phi0} must be small and positive to start on the bounded branch"
        )));
    }
    let last = *cdf.last().unwrap();
    if 1.0 - last >= 1e-3 {
        return Err(Error::InvalidParam(format!(
            "1 - Phi(x_max) = {} is too large; extend the mesh",
            1.0 - last
        )));
    }

    let nodes = mesh.nodes();
    let stops: Vec<f64> = nodes.iter().map(|x| x.ln()).collect();
    let u0 = stops[0];
    let x0 = nodes[0];
    let p = alpha0 / gamma;
    let h0 = p * x0 * phi0 / (p + 1.0);
    let decay = r - gamma + alpha0;
    if !(decay > 0.0) {
        return Err(Error::InvalidParam(format!(
            "r - gamma + alpha0 = {decay} must be positive for a bounded value near the origin"
        )));
    }

    // y = [Phi, 1 - Phi, H, v / (1 + x), W]; Phi and its complement are carried
    // separately so each keeps full relative precision where it is small.
    let solve = |w0: f64| -> Result<Vec<[f64; 5]>> {
        let v0 = alpha0 * w0 / decay + x0 / (r + alpha0);
        integrate_to(
            |u, y: &[f64; 5]| {
                let x = u.exp();
                let x_phi = alpha0 * y[0] * y[1] / gamma;
                let v = (1.0 + x) * y[3];
                let dv = (x + alpha0 * y[4] - (r - gamma + alpha0 * y[1]) * v) / gamma;
                [x_phi, -x_phi, x * x_phi, (dv - x * y[3]) / (1.0 + x), -v * x_phi]
            },
            u0,
            [phi0, 1.0 - phi0, h0, v0 / (1.0 + x0), w0],
            &stops,
            1e-13,
            1e-3,
        )
    };

    // W(x_max) is affine in W(x_min)
    let end = |ys: &[[f64; 5]]| ys.last().unwrap()[4];
    let (mut w_a, mut w_b) = (0.0, 1.0);
    let mut end_a = end(&solve(w_a)?);
    let mut states = solve(w_b)?;
    let mut end_b = end(&states);
    let mut iterations = 0;
    while end_b.abs() >= 1e-10 {
        iterations += 1;
        if iterations > 50 || end_b == end_a {
            return Err(Error::NotConverged {
                iterations,
                residual: end_b.abs(),
            });
        }
        let w_next = w_b - end_b * (w_b - w_a) / (end_b - end_a);
        w_a = w_b;
        end_a = end_b;
        w_b = w_next;
        states = solve(w_b)?;
        end_b = end(&states);
    }

    let max_mismatch = states
        .iter()
        .zip(cdf)
        .fold(0.0f64, |m, (y, c)| m.max((y[0] - c).abs()));
    if max_mismatch > 1e-8 {
        return Err(Error::InvalidParam(format!(
            "Phi deviates from a constant-rate profile by {max_mismatch:e}"
        )));
    }

    let v: Vec<f64> = nodes.iter().zip(&states).map(|(x, y)| (1.0 + x) * y[3]).collect();
    let phi: Vec<f64> = nodes
        .iter()
        .zip(&states)
        .map(|(x, y)| alpha0 * y[0] * y[1] / (gamma * x))
        .collect();
    let residual = v_residual(&v, &phi, gamma, r, alpha0, mesh)?;
    if residual > V_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: V_RESIDUAL_TOL,
        });
    }
    // K from the W equation at x_max, where W = 0 and H is anchored to 0
    let last = states.last().unwrap();
    let k_const = alpha0 * v[v.len() - 1] * last[0] * last[1];
    Ok(WSolution {
        big_w: states.iter().map(|y| y[4]).collect(),
        h: states.iter().map(|y| y[2] - last[2]).collect(),
        k_const,
        v,
        residual,
        shooting_iterations: iterations,
    })
}

/// Centered first derivative on a non-uniform mesh, one-sided at the ends.
pub(crate) fn derivative(values: &[f64], nodes: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    d[0] = (values[1] - values[0]) / (nodes[1] - nodes[0]);
    d[n - 1] = (values[n - 1] - values[n - 2]) / (nodes[n - 1] - nodes[n - 2]);
    for i in 1..n - 1 {
        let (h0, h1) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        d[i] = (-h1 / (h0 * (h0 + h1))) * values[i - 1]
            + ((h1 - h0) / (h0 * h1)) * values[i]
            + (h0 / (h1 * (h0 + h1))) * values[i + 1];
    }
    d
}

/// Plug-back residual of `(r - gamma) v + gamma x v' = x + alpha0 int_x (v(y) - v(x)) phi dy`
/// in `(1 + x)`-weighted sup norm over interior nodes.
pub fn v_residual(
    v: &[f64],
    phi: &[f64],
    gamma: f64,
    r: f64,
    alpha0: f64,
    mesh: &Mesh,
) -> Result<f64> {
    if v.len() != mesh.len() || phi.len() != mesh.len() {
        return Err(Error::MeshMismatch);
    }
    let x = mesh.nodes();
    let dv = derivative(v, x);
    let masses = mesh.nodal_masses(phi)?;
    let above = exclusive_suffix(&masses);
    let n = x.len();
    let mut gain = vec![0.0; n];
    for i in (0..n - 1).rev() {
        gain[i] = gain[i + 1] + (v[i + 1] - v[i]) * above[i];
    }
    Ok((1..n - 1)
        .map(|i| {
            let lhs = (r - gamma) * v[i] + gamma * x[i] * dv[i];
            let rhs = x[i] + alpha0 * gain[i];
            (lhs - rhs).abs() / (1.0 + x[i])
        })
        .fold(0.0, f64::max))
}

/// Plug-back residual of `gamma x Phi' = (mass - Phi) int_0^x alpha(sigma) phi`
/// in `(1 + x)`-weighted sup norm over interior nodes.
pub fn phi_residual(profile: &BgpProfile, tech: &LearningTech) -> Result<f64> {
    let mesh = &profile.mesh;
    let x = mesh.nodes();
    let d_cdf = derivative(&profile.cdf, x);
    let alpha_phi: Vec<f64> = profile
        .density
        .iter()
        .zip(&profile.sigma)
        .enumerate()
        .map(|(i, (p, s))| tech.rate(*s, i) * p)
        .collect();
    // head below x_min: alpha is constant there for admissible sigma
    let mut running = tech.rate(profile.sigma[0], 0) * profile.cdf[0];
    let mut worst = 0.0f64;
    for i in 1..x.len() {
        running += 0.5 * (x[i] - x[i - 1]) * (alpha_phi[i] + alpha_phi[i - 1]);
        if i + 1 < x.len() {
            let res = profile.gamma * x[i] * d_cdf[i] - profile.survival[i] * running;
            worst = worst.max(res.abs() / (1.0 + x[i]));
        }
    }
    Ok(worst)
}

/// Admissible rescaled strategies: `sigma = 1` near the origin, non-increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaRule {
    /// `sigma = 1` everywhere.
    Unit,
    /// `sigma = 1` up to `x0`, `low` beyond `x0 e^{ramp}`, with a C1 cubic ramp
    /// in `ln x` in between. `ramp = 0` is a sharp step.
    Step { x0: f64, low: f64, ramp: f64 },
}

impl SigmaRule {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            SigmaRule::Unit => 1.0,
            SigmaRule::Step { x0, low, ramp } => {
                if x <= x0 {
                    1.0
                } else if ramp <= 0.0 || x >= x0 * ramp.exp() {
                    low
                } else {
                    let t = (x / x0).ln() / ramp;
                    1.0 - (1.0 - low) * t * t * (3.0 - 2.0 * t)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let SigmaRule::Step { x0, low, ramp } = *self {
            check_positive("x0", x0)?;
            if !(0.0..=1.0).contains(&low) {
                return Err(Error::InvalidParam(format!("sigma beyond the step must lie in [0, 1], got {low}")));
            }
            if !(ramp.is_finite() && ramp >= 0.0) {
                return Err(Error::InvalidParam(format!("ramp width must be non-negative, got {ramp}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralOptions {
    /// Scale of the closed-form head `Phi = x^a / (x^a + k)`.
    pub k_scale: f64,
    /// End of the closed-form head when `sigma` is 1 everywhere.
    pub unit_head_end: f64,
    /// Relative tolerance on successive growth rates.
    pub tol: f64,
    pub max_iter: usize,
    /// Per-step absolute tolerance of the adaptive integrator.
    pub ode_tol: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions {
            k_scale: 0.05,
            unit_head_end: 1e-2,
            tol: 1e-10,
            max_iter: 50,
            ode_tol: 1e-10,
        }
    }
}

struct Sweep {
    cdf: Vec<f64>,
    survival: Vec<f64>,
    density: Vec<f64>,
    g_total: f64,
}

/// One pass of the construction for a fixed growth rate.
///
/// On `[x_min, x_head]` the profile is closed form. Beyond it,
/// `gamma x Phi' = (1 - Phi) G` with `G' = alpha(sigma) Phi'` is integrated as
/// `d ln(1 - Phi)/du = -G / gamma`, `dG/du = alpha(sigma) (1 - Phi) G / gamma`.
fn sweep(
    gamma: f64,
    alpha: &dyn Fn(f64) -> f64,
    x_head: f64,
    k: f64,
    mesh: &Mesh,
    ode_tol: f64,
) -> Result<Sweep> {
    let alpha1 = alpha(0.0);
    let a = alpha1 / gamma;
    let nodes = mesh.nodes();
    let n = nodes.len();
    let mut cdf = Vec::with_capacity(n);
    let mut survival = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    let head = |x: f64| {
        let q = k * x.powf(-a);
        (1.0 / (1.0 + q), q / (1.0 + q), a * q / (x * (1.0 + q) * (1.0 + q)))
    };
    let split = nodes.partition_point(|&x| x <= x_head);
    for &x in &nodes[..split] {
        let (c, s, d) = head(x);
        cdf.push(c);
        survival.push(s);
        density.push(d);
    }
    let (c_head, s_head, _) = head(x_head);
    let mut g_end = alpha1 * c_head;
    let mut x_end = x_head;
    let mut s_end = s_head;
    if split < n {
        let stops: Vec<f64> = nodes[split..].iter().map(|x| x.ln()).collect();
        let states = integrate_to(
            |u, y: &[f64; 2]| {
                let x = u.exp();
                let q = y[0].exp();
                [-y[1] / gamma, alpha(x) * q * y[1] / gamma]
            },
            x_head.ln(),
            [s_head.ln(), g_end],
            &stops,
            ode_tol,
            1e-3,
        )?;
        for (&x, y) in nodes[split..].iter().zip(&states) {
            let q = y[0].exp();
            cdf.push(1.0 - q);
            survival.push(q);
            density.push(q * y[1] / (gamma * x));
        }
        g_end = states.last().unwrap()[1];
        x_end = nodes[n - 1];
        s_end = survival[n - 1];
    }
    // beyond the mesh alpha(sigma) is frozen at its last value
    let g_total = g_end + alpha(x_end) * s_end;
    Ok(Sweep {
        cdf,
        survival,
        density,
        g_total,
    })
}

/// Fits `mass - Phi ~ k x^{-1/theta}` over the last decade of the mesh.
///
/// Returns `(k, free_slope)`; `k` uses the fixed slope.
pub fn fit_tail_constant(survival: &[f64], mesh: &Mesh, theta: f64) -> Result<(f64, f64)> {
    let x = mesh.nodes();
    let lo = mesh.z_max() / 10.0;
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(survival)
        .filter(|(x, _)| **x >= lo)
        .map(|(x, s)| (x.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    if let Some(node) = survival.iter().position(|s| !(*s > 0.0)).filter(|&i| x[i] >= lo) {
        return Err(Error::DegenerateTail { node });
    }
    let m = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let slope = sxy / sxx;
    let log_k = mean_y + mean_x / theta;
    Ok((log_k.exp(), slope))
}

/// Fixed point between the growth rate and the CDF profile for a prescribed `sigma`.
pub fn bgp_general(
    sigma: SigmaRule,
    tech: &LearningTech,
    theta: f64,
    mesh: Arc<Mesh>,
    options: &GeneralOptions,
) -> Result<BgpProfile> {
    check_positive("theta", theta)?;
    check_positive("k_scale", options.k_scale)?;
    check_rescaled_mesh(&mesh)?;
    sigma.validate()?;
    if matches!(tech, LearningTech::SpatialRule(_)) {
        return Err(Error::InvalidTech("rescaled profiles need a strategy-driven learning rate".into()));
    }
    tech.validate()?;
    let alpha1 = tech.rate(1.0, 0);
    check_positive("alpha(1)", alpha1)?;
    if theta >= 1.0 {
        log::warn!("theta = {theta} >= 1: Phi' may be unbounded near the origin");
    }
    let x_head = match sigma {
        SigmaRule::Unit => options.unit_head_end,
        SigmaRule::Step { x0, .. } => x0,
    };
    if !(x_head >= mesh.z_min() && x_head < mesh.z_max()) {
        return Err(Error::InvalidParam(format!(
            "closed-form head end {x_head} must lie in [{}, {})",
            mesh.z_min(),
            mesh.z_max()
        )));
    }
    // alpha as a function of x, with alpha(0) standing for the head value
    let alpha = |x: f64| if x <= 0.0 { alpha1 } else { tech.rate(sigma.value(x), 0) };

    let mut gamma = theta * alpha1;
    let mut history = vec![gamma];
    for iteration in 1..=options.max_iter {
        let pass = sweep(gamma, &alpha, x_head, options.k_scale, &mesh, options.ode_tol)?;
        let next = theta * pass.g_total;
        history.push(next);
        log::debug!("bgp iteration {iteration}: gamma = {next:.12e}");
        if (next - gamma).abs() < options.tol * gamma {
            let (k_tail, slope) = fit_tail_constant(&pass.survival, &mesh, theta)?;
            let expected = -1.0 / theta;
            if ((slope - expected) / expected).abs() > TAIL_SLOPE_TOL {
                return Err(Error::NoTail { slope, expected });
            }
            let sigma_nodes = mesh.nodes().iter().map(|&x| sigma.value(x)).collect();
            return Ok(BgpProfile {
                mesh,
                gamma,
                theta,
                k_tail,
                mass: 1.0,
                cdf: pass.cdf,
                survival: pass.survival,
                density: pass.density,
                value: None,
                sigma: sigma_nodes,
                iterations: iteration,
                converged: true,
                gamma_history: history,
            });
        }
        gamma = next;
    }
    Err(Error::NotConverged {
        iterations: options.max_iter,
        residual: (history[history.len() - 1] - history[history.len() - 2]).abs() / gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Spacing};

    fn log_mesh(lo: f64, hi: f64, n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Spacing::Logarithmic, lo, hi, n).unwrap())
    }

    #[test]
    fn gamma_examples() {
        let mesh = build_mesh(Spacing::Linear, 0.0, 1.0, 101).unwrap();
        let ones = vec![1.0; 101];
        let zero = LearningTech::ConstantRate { alpha0: 0.0 };
        assert_eq!(gamma_from_profile(&ones, &ones, &zero, 0.5, &mesh).unwrap(), 0.0);
        let tech = LearningTech::ConstantRate { alpha0: 0.0849 };
        let g = gamma_from_profile(&ones, &ones, &tech, 0.5, &mesh).unwrap();
        assert!((g - 0.04245).abs() < 1e-15);
        let twos = vec![2.0; 101];
        let unit = LearningTech::ConstantRate { alpha0: 1.0 };
        assert!((gamma_from_profile(&twos, &ones, &unit, 1.0, &mesh).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(
            gamma_from_profile(&ones[..5], &ones, &tech, 0.5, &mesh),
            Err(Error::MeshMismatch)
        );
    }

    #[test]
    fn constant_profile() {
        let mesh = log_mesh(1e-4, 1e4, 4001);
        let p = bgp_constant_alpha(0.0849, 0.5, 0.05, 0.06, mesh.clone()).unwrap();
        assert_eq!(p.gamma, 0.5 * 0.0849);
        let mid = mesh.nearest_node(0.05f64.sqrt());
        assert!((mesh.nodes()[mid] - 0.223607).abs() < 1e-3);
        let v = p.value.as_ref().unwrap();
        assert!(v.iter().all(|v| *v >= 0.0));
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        let last = mesh.len() - 1;
        assert!((v[last] * 0.06 / mesh.nodes()[last] - 1.0).abs() < 0.05);
        let (k, slope) = fit_tail_constant(&p.survival, &mesh, 0.5).unwrap();
        assert!((k / 0.05 - 1.0).abs() < 1e-6);
        assert!((slope + 2.0).abs() < 1e-6);
    }

    #[test]
    fn value_residual_converges_at_second_order() {
        // theta = 0.4 leaves 1 - Phi(x_max) near 5e-12
        let mut previous = f64::INFINITY;
        for n in [2001, 4001, 8001] {
            let mesh = log_mesh(1e-4, 1e4, n);
            let p = bgp_constant_alpha(0.0849, 0.4, 0.05, 0.06, mesh.clone()).unwrap();
            let res = v_residual(p.value.as_ref().unwrap(), &p.density, p.gamma, 0.06, 0.0849, &mesh).unwrap();
            assert!(res < previous / 3.5, "{res} after {previous}");
            previous = res;
        }
    }

    #[test]
    fn unit_sigma_matches_closed_form() {
        let mesh = log_mesh(1e-4, 1e4, 2001);
        let tech = LearningTech::PowerLaw { alpha0: 0.0849, n: 0.3 };
        let p = bgp_general(SigmaRule::Unit, &tech, 0.5, mesh.clone(), &GeneralOptions::default()).unwrap();
        assert!((p.gamma / 0.04245 - 1.0).abs() < 1e-9);
        for (x, c) in mesh.nodes().iter().zip(&p.cdf) {
            assert!((c - 1.0 / (1.0 + 0.05 / (x * x))).abs() < 1e-8);
        }
    }

    #[test]
    fn step_sigma_is_bracketed() {
        let mesh = log_mesh(1e-4, 1e4, 2001);
        let tech = LearningTech::PowerLaw { alpha0: 0.0849, n: 0.3 };
        let sigma = SigmaRule::Step { x0: 0.2, low: 0.5, ramp: 0.5 };
        let p = bgp_general(sigma, &tech, 0.5, mesh, &GeneralOptions::default()).unwrap();
        assert!(p.gamma > 0.5 * tech.rate(0.5, 0) && p.gamma < 0.5 * tech.rate(1.0, 0));
        assert!(p.iterations <= 50);
        assert!(phi_residual(&p, &tech).unwrap() < PHI_RESIDUAL_TOL);
    }

    #[test]
    fn sigma_rule_shape() {
        let s = SigmaRule::Step { x0: 1.0, low: 0.5, ramp: 1.0 };
        assert_eq!(s.value(0.5), 1.0);
        assert_eq!(s.value(3.0), 0.5);
        let mid = s.value(0.5f64.exp());
        assert!((mid - 0.75).abs() < 1e-12);
        let sharp = SigmaRule::Step { x0: 1.0, low: 0.2, ramp: 0.0 };
        assert_eq!(sharp.value(1.0 + 1e-12), 0.2);
    }

    #[test]
    fn rejects_short_mesh_for_w() {
        let mesh = log_mesh(1e-4, 2.0, 201);
        assert!(matches!(
            bgp_constant_alpha(0.0849, 0.5, 0.05, 0.06, mesh),
            Err(Error::InvalidParam(_))
        ));
    }
}
