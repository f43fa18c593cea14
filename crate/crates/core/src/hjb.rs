//! Backward Hamilton-Jacobi-Bellman sweep for the value of knowledge.
//!
//! ```text
//! dV/dt = r V - max_s [ (1 - s) z + alpha(s) B ],   B(z) = int_z (V(y) - V(z)) f(y) dy
//! ```
//!
//! solved backwards from `V(., T)`. The maximizer is computed pointwise in
//! closed form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::grid::{exclusive_suffix, Mesh, TimeAxis};
use crate::kinetic::{same_mesh, DensityField, LearningTech, StrategyField};

/// Relative tolerance for the sign and ordering checks on `V`.
pub const VALUE_CHECK_TOL: f64 = 1e-10;

/// Largest allowed change of a strategy entry when checking consistency.
pub const CONTROL_CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ValueField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.len(), values.len())?;
        check_finite(&values)?;
        Ok(ValueField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.len()];
        ValueField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V / (1 + z)`, the scale-free form used in all comparisons.
    pub fn weighted(&self) -> Vec<f64> {
        self.mesh
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(z, v)| v / (1.0 + z))
            .collect()
    }
}

/// Expected gain from meeting someone more knowledgeable.
#[derive(Debug, Clone, PartialEq)]
pub struct GainField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GainField {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `B_i = U[V f]_i - V_i U[f]_i`.
///
/// The node's own half weight cancels, leaving `sum_{j>i} m_j (V_j - V_i)`,
/// which is accumulated from the top as `B_i = B_{i+1} + (V_{i+1} - V_i) T_i`
/// with `T_i = sum_{j>i} m_j`. No cancellation occurs, so a non-decreasing `V`
/// gives a non-negative, non-increasing `B` exactly in floating point.
pub fn compute_gain(value: &ValueField, f: &DensityField) -> Result<GainField> {
    if !same_mesh(&value.mesh, f.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let v = &value.values;
    let above = exclusive_suffix(&f.nodal_masses());
    let n = v.len();
    let mut gain = vec![0.0; n];
    for i in (0..n - 1).rev() {
        gain[i] = gain[i + 1] + (v[i + 1] - v[i]) * above[i];
    }
    Ok(GainField {
        mesh: value.mesh.clone(),
        values: gain,
    })
}

/// Optimal learning effort and the resulting meeting rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub s: f64,
    pub alpha: f64,
}

/// Unique maximizer of `(1 - s) z + alpha(s) B` over `s` in `[0, 1]`.
///
/// Ties resolve to the smaller effort.
pub fn optimal_control(z: f64, b: f64, tech: &LearningTech) -> Result<Control> {
    match *tech {
        LearningTech::PowerLaw { alpha0, n } => {
            if !(0.0..1.0).contains(&n) {
                return Err(Error::InvalidTech(format!("n must lie in [0, 1), got {n}")));
            }
            if n == 0.0 {
                return Ok(Control { s: 0.0, alpha: alpha0 });
            }
            let s = if b <= 0.0 {
                0.0
            } else if z <= 0.0 {
                1.0
            } else {
                (z / (alpha0 * n * b)).powf(1.0 / (n - 1.0)).min(1.0)
            };
            Ok(Control {
                s,
                alpha: alpha0 * s.powf(n),
            })
        }
        LearningTech::ConstantRate { alpha0 } => Ok(Control { s: 0.0, alpha: alpha0 }),
        LearningTech::SpatialRule(_) => Err(Error::InvalidTech(
            "a per-node rate table has no pointwise control law; use controls_at_nodes".into(),
        )),
    }
}

/// Optimal controls at every node for a given gain field.
pub fn controls_at_nodes(gain: &GainField, tech: &LearningTech) -> Result<Vec<Control>> {
    if let LearningTech::SpatialRule(table) = tech {
        check_len(gain.values.len(), table.len())?;
        return Ok(table.iter().map(|&alpha| Control { s: 0.0, alpha }).collect());
    }
    gain.mesh
        .nodes()
        .iter()
        .zip(&gain.values)
        .map(|(&z, &b)| optimal_control(z, b, tech))
        .collect()
}

/// `dV/dt = r V - [(1 - S) z + alpha(S) B(V, f)]`.
pub fn hjb_rhs(
    value: &ValueField,
    f: &DensityField,
    strategy: &StrategyField,
    tech: &LearningTech,
    r: f64,
) -> Result<Vec<f64>> {
    if !same_mesh(&value.mesh, strategy.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let gain = compute_gain(value, f)?;
    let optimal = controls_at_nodes(&gain, tech)?;
    for (node, (c, &given)) in optimal.iter().zip(strategy.values()).enumerate() {
        if (c.s - given).abs() > CONTROL_CONSISTENCY_TOL {
            return Err(Error::ControlInconsistent {
                node,
                given,
                optimal: c.s,
            });
        }
    }
    let z = value.mesh.nodes();
    Ok((0..z.len())
        .map(|i| {
            let s = strategy.values()[i];
            let alpha = tech.rate(s, i);
            r * value.values[i] - ((1.0 - s) * z[i] + alpha * gain.values[i])
        })
        .collect())
}

/// Time discretization of the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HjbScheme {
    /// `V_prev = V - dt * rhs`.
    ExplicitEuler,
    /// Integrates the discount term `r V` exactly and the running payoff
    /// explicitly: `V_prev = e^{-r dt} V + (1 - e^{-r dt}) / r * H`.
    #[default]
    Exponential,
}

#[derive(Debug, Clone)]
pub struct BackwardStep {
    /// Value one step earlier.
    pub value: ValueField,
    /// Optimal strategy at the later time (the one the step started from).
    pub strategy: StrategyField,
    /// Gain at the later time.
    pub gain: GainField,
}

/// One explicit Euler step backwards in time.
pub fn step_value_backward(
    v_next: &ValueField,
    f: &DensityField,
    tech: &LearningTech,
    r: f64,
    dt: f64,
) -> Result<BackwardStep> {
    step_value_backward_with(v_next, f, tech, r, dt, HjbScheme::ExplicitEuler)
}

pub fn step_value_backward_with(
    v_next: &ValueField,
    f: &DensityField,
    tech: &LearningTech,
    r: f64,
    dt: f64,
    scheme: HjbScheme,
) -> Result<BackwardStep> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
    }
    let gain = compute_gain(v_next, f)?;
    let controls = controls_at_nodes(&gain, tech)?;
    let (decay, payoff_weight) = match scheme {
        HjbScheme::ExplicitEuler => (1.0 - r * dt, dt),
        HjbScheme::Exponential => {
            let decay = (-r * dt).exp();
            let weight = if r == 0.0 { dt } else { -(-r * dt).exp_m1() / r };
            (decay, weight)
        }
    };
    let z = v_next.mesh.nodes();
    let values: Vec<f64> = (0..z.len())
        .map(|i| {
            let c = controls[i];
            let payoff = (1.0 - c.s) * z[i] + c.alpha * gain.values[i];
            decay * v_next.values[i] + payoff_weight * payoff
        })
        .collect();
    check_value_invariants(&values)?;
    let strategy = StrategyField::new(
        v_next.mesh.clone(),
        controls.iter().map(|c| c.s).collect(),
    )?;
    Ok(BackwardStep {
        value: ValueField::new(v_next.mesh.clone(), values)?,
        strategy,
        gain,
    })
}

/// `V >= 0` and non-decreasing in `z`, up to [`VALUE_CHECK_TOL`].
pub fn check_value_invariants(values: &[f64]) -> Result<()> {
    let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = VALUE_CHECK_TOL * scale;
    if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| **v < -tol) {
        return Err(Error::PositivityViolation { node, value });
    }
    for (node, w) in values.windows(2).enumerate() {
        let delta = w[1] - w[0];
        if delta < -tol {
            return Err(Error::MonotonicityViolation {
                field: "value",
                node,
                delta,
            });
        }
    }
    Ok(())
}

/// Checks the stability bound `dt (r + max alpha * mass) < 1`.
pub fn check_backward_bound(tech: &LearningTech, r: f64, mass: f64, dt: f64) -> Result<()> {
    let bound = dt * (r + tech.max_rate() * mass);
    if bound >= 1.0 {
        return Err(Error::InvalidParam(format!(
            "dt * (r + max(alpha) * mass) = {bound} violates the stability bound 1"
        )));
    }
    Ok(())
}

/// Result of a full backward sweep, indexed by time step.
#[derive(Debug, Clone)]
pub struct BackwardSweep {
    pub values: Vec<ValueField>,
    pub strategies: Vec<StrategyField>,
    pub gains: Vec<GainField>,
}

/// Sweeps from `terminal` at `t_final` down to `t = 0` against a frozen density path.
pub fn solve_hjb_backward(
    density_path: &[DensityField],
    terminal: &ValueField,
    tech: &LearningTech,
    r: f64,
    time: &TimeAxis,
    scheme: HjbScheme,
) -> Result<BackwardSweep> {
    let n = time.n_steps();
    check_len(n + 1, density_path.len())?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParam(format!("discount rate must be non-negative, got {r}")));
    }
    check_value_invariants(terminal.values()).map_err(|e| {
        Error::InvalidParam(format!("terminal value must be non-negative and non-decreasing: {e}"))
    })?;
    check_backward_bound(tech, r, density_path[0].mass(), time.dt())?;

    let mut values = vec![terminal.clone(); n + 1];
    let mut strategies = Vec::with_capacity(n + 1);
    let mut gains = Vec::with_capacity(n + 1);
    for k in (1..=n).rev() {
        let step = step_value_backward_with(&values[k], &density_path[k], tech, r, time.dt(), scheme)?;
        values[k - 1] = step.value;
        strategies.push(step.strategy);
        gains.push(step.gain);
    }
    let gain0 = compute_gain(&values[0], &density_path[0])?;
    let controls0 = controls_at_nodes(&gain0, tech)?;
    strategies.push(StrategyField::new(
        terminal.mesh().clone(),
        controls0.iter().map(|c| c.s).collect(),
    )?);
    gains.push(gain0);
    strategies.reverse();
    gains.reverse();
    Ok(BackwardSweep {
        values,
        strategies,
        gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Spacing};

    fn linear(n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Spacing::Linear, 0.0, 1.0, n).unwrap())
    }

    #[test]
    fn gain_examples() {
        let mesh = linear(201);
        let f = DensityField::new(mesh.clone(), vec![1.0; 201]).unwrap();
        let flat = ValueField::new(mesh.clone(), vec![3.0; 201]).unwrap();
        assert!(compute_gain(&flat, &f).unwrap().values().iter().all(|b| *b == 0.0));

        let v = ValueField::new(mesh.clone(), mesh.nodes().to_vec()).unwrap();
        let gain = compute_gain(&v, &f).unwrap();
        assert_eq!(gain.values()[200], 0.0);
        // brute-force quadrature of (1 - z)^2 / 2 on the same nodes
        for (i, &z) in mesh.nodes().iter().enumerate() {
            let integrand: Vec<f64> = mesh.nodes().iter().map(|&y| if y > z { y - z } else { 0.0 }).collect();
            let brute = mesh.integrate(&integrand).unwrap();
            assert!((gain.values()[i] - brute).abs() < 1e-12);
            assert!((gain.values()[i] - (1.0 - z).powi(2) / 2.0).abs() < 1e-4);
        }
        assert!((gain.values()[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn gain_requires_shared_mesh() {
        let f = DensityField::new(linear(11), vec![1.0; 11]).unwrap();
        let v = ValueField::zeros(Arc::new(build_mesh(Spacing::Linear, 0.0, 2.0, 11).unwrap()));
        assert_eq!(compute_gain(&v, &f).unwrap_err(), Error::MeshMismatch);
    }

    fn grid_search(z: f64, b: f64, alpha0: f64, n: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut best_s = 0.0;
        for j in 0..=1_000_000u32 {
            let s = j as f64 * 1e-6;
            let obj = (1.0 - s) * z + alpha0 * s.powf(n) * b;
            if obj > best {
                best = obj;
                best_s = s;
            }
        }
        best_s
    }

    #[test]
    fn control_cases() {
        let tech = LearningTech::PowerLaw { alpha0: 1.0, n: 0.5 };
        assert_eq!(optimal_control(1.0, -0.5, &tech).unwrap().s, 0.0);
        assert_eq!(optimal_control(0.0, 0.3, &tech).unwrap().s, 1.0);
        let interior = optimal_control(1.0, 1.0, &tech).unwrap();
        assert!((interior.s - 0.25).abs() < 1e-15);
        assert!((grid_search(1.0, 1.0, 1.0, 0.5) - 0.25).abs() <= 1e-6);
        assert_eq!(optimal_control(1.0, 10.0, &tech).unwrap().s, 1.0);
        assert_eq!(grid_search(1.0, 10.0, 1.0, 0.5), 1.0);
        assert_eq!(
            optimal_control(2.0, 5.0, &LearningTech::ConstantRate { alpha0: 0.3 }).unwrap(),
            Control { s: 0.0, alpha: 0.3 }
        );
        assert!(matches!(
            optimal_control(1.0, 1.0, &LearningTech::PowerLaw { alpha0: 1.0, n: 1.0 }),
            Err(Error::InvalidTech(_))
        ));
    }

    #[test]
    fn rhs_examples() {
        let mesh = linear(11);
        let f = DensityField::new(mesh.clone(), vec![1.0; 11]).unwrap();
        let tech = LearningTech::PowerLaw { alpha0: 0.5, n: 0.3 };
        let zero = ValueField::zeros(mesh.clone());
        let s = StrategyField::zeros(mesh.clone());
        let rhs = hjb_rhs(&zero, &f, &s, &tech, 0.06).unwrap();
        for (r, z) in rhs.iter().zip(mesh.nodes()) {
            assert!((r + z).abs() < 1e-15);
        }

        let constant = ValueField::new(mesh.clone(), vec![2.0; 11]).unwrap();
        let rhs = hjb_rhs(&constant, &f, &s, &tech, 0.0).unwrap();
        for (r, z) in rhs.iter().zip(mesh.nodes()) {
            assert!((r + z).abs() < 1e-15);
        }

        let idle = LearningTech::ConstantRate { alpha0: 0.0 };
        let v = ValueField::new(mesh.clone(), mesh.nodes().iter().map(|z| 3.0 * z).collect()).unwrap();
        let rhs = hjb_rhs(&v, &f, &s, &idle, 0.1).unwrap();
        for ((r, z), v) in rhs.iter().zip(mesh.nodes()).zip(v.values()) {
            assert!((r - (0.1 * v - z)).abs() < 1e-15);
        }

        let wrong = StrategyField::new(mesh.clone(), vec![0.5; 11]).unwrap();
        assert!(matches!(
            hjb_rhs(&zero, &f, &wrong, &tech, 0.06),
            Err(Error::ControlInconsistent { .. })
        ));
    }

    #[test]
    fn one_step_from_zero_terminal() {
        let mesh = linear(11);
        let f = DensityField::new(mesh.clone(), vec![1.0; 11]).unwrap();
        let tech = LearningTech::PowerLaw { alpha0: 0.5, n: 0.3 };
        let step = step_value_backward(&ValueField::zeros(mesh.clone()), &f, &tech, 0.06, 0.25).unwrap();
        for (v, z) in step.value.values().iter().zip(mesh.nodes()) {
            assert!((v - 0.25 * z).abs() < 1e-15);
        }
        assert_eq!(*step.strategy.values().last().unwrap(), 0.0);
    }

    #[test]
    fn decoupled_sweep_matches_analytic_value() {
        // alpha = 0: V = z (1 - e^{-r (T - t)}) / r
        let mesh = Arc::new(build_mesh(Spacing::Logarithmic, 1e-3, 10.0, 101).unwrap());
        let f = DensityField::new(mesh.clone(), vec![1.0; 101]).unwrap().renormalized(1.0).unwrap();
        let time = TimeAxis::new(200.0, 400).unwrap();
        let path = vec![f; 401];
        let tech = LearningTech::ConstantRate { alpha0: 0.0 };
        let sweep = solve_hjb_backward(&path, &ValueField::zeros(mesh.clone()), &tech, 0.06, &time, HjbScheme::Exponential).unwrap();
        let ratio = sweep.values[0].values()[50] / mesh.nodes()[50];
        assert!((ratio - (1.0 - (-12f64).exp()) / 0.06).abs() < 1e-9);
        assert!((ratio - 16.6666).abs() < 1e-3);

        // explicit Euler converges to the same limit as dt -> 0
        let fine = TimeAxis::new(200.0, 40_000).unwrap();
        let path = vec![path[0].clone(); 40_001];
        let sweep = solve_hjb_backward(&path, &ValueField::zeros(mesh.clone()), &tech, 0.06, &fine, HjbScheme::ExplicitEuler).unwrap();
        let ratio = sweep.values[0].values()[50] / mesh.nodes()[50];
        assert!((ratio - (1.0 - (-12f64).exp()) / 0.06).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_terminal_data() {
        let mesh = linear(5);
        let f = DensityField::new(mesh.clone(), vec![1.0; 5]).unwrap();
        let time = TimeAxis::new(1.0, 2).unwrap();
        let terminal = ValueField::new(mesh.clone(), vec![1.0, 0.5, 2.0, 3.0, 4.0]).unwrap();
        let tech = LearningTech::ConstantRate { alpha0: 0.1 };
        assert!(matches!(
            solve_hjb_backward(&vec![f; 3], &terminal, &tech, 0.1, &time, HjbScheme::Exponential),
            Err(Error::InvalidParam(_))
        ));
    }
}
