//! Adaptive classical Runge-Kutta with step-doubling error control.

use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 4.0;
const MIN_SHRINK: f64 = 0.2;
const MAX_STEPS: usize = 10_000_000;

fn rk4<const D: usize, F>(rhs: &mut F, x: f64, y: &[f64; D], h: f64) -> [f64; D]
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let axpy = |y: &[f64; D], k: &[f64; D], c: f64| -> [f64; D] {
        let mut out = *y;
        for i in 0..D {
            out[i] += c * k[i];
        }
        out
    };
    let k1 = rhs(x, y);
    let k2 = rhs(x + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = rhs(x + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = rhs(x + h, &axpy(y, &k3, h));
    let mut out = *y;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `y' = rhs(x, y)` from `(x0, y0)` and records `y` at each of `stops`.
///
/// `stops` must be non-decreasing and not below `x0`. Each accepted step keeps
/// the step-doubling estimate of the local error below `tol` in every component;
/// the returned values carry the Richardson correction.
pub(crate) fn integrate_to<const D: usize, F>(
    mut rhs: F,
    x0: f64,
    y0: [f64; D],
    stops: &[f64],
    tol: f64,
    h_init: f64,
) -> Result<Vec<[f64; D]>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let mut x = x0;
    let mut y = y0;
    let mut h = h_init;
    let mut out = Vec::with_capacity(stops.len());
    let mut steps = 0usize;
    for &stop in stops {
        if stop < x {
            return Err(Error::InvalidParam(format!(
                "integration stops must be non-decreasing from {x0}, got {stop} after {x}"
            )));
        }
        while x < stop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::NotConverged {
                    iterations: steps,
                    residual: h,
                });
            }
            let last = h >= stop - x;
            let step = if last { stop - x } else { h };
            let full = rk4(&mut rhs, x, &y, step);
            let half = rk4(&mut rhs, x, &y, 0.5 * step);
            let two = rk4(&mut rhs, x + 0.5 * step, &half, 0.5 * step);
            let mut err = 0.0f64;
            for i in 0..D {
                err = err.max((two[i] - full[i]).abs() / 15.0);
            }
            if !err.is_finite() {
                return Err(Error::NonFiniteInput { node: out.len() });
            }
            if err <= tol {
                for i in 0..D {
                    y[i] = two[i] + (two[i] - full[i]) / 15.0;
                }
                x = if last { stop } else { x + step };
            }
            let factor = if err == 0.0 {
                MAX_GROWTH
            } else {
                (SAFETY * (tol / err).powf(0.2)).clamp(MIN_SHRINK, MAX_GROWTH)
            };
            // a shortened final step says nothing about the natural step size
            if !(last && err <= tol) || factor < 1.0 {
                h = step * factor;
            }
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::NotConverged {
                    iterations: steps,
                    residual: err,
                });
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let stops: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let ys = integrate_to(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], &stops, 1e-12, 0.1).unwrap();
        for (x, y) in stops.iter().zip(&ys) {
            assert!((y[0] - x.exp()).abs() < 1e-9 * x.exp());
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let stops = [1.0, 2.0, std::f64::consts::PI];
        let ys = integrate_to(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], &stops, 1e-12, 0.5).unwrap();
        for (x, y) in stops.iter().zip(&ys) {
            assert!((y[0] - x.sin()).abs() < 1e-9);
            assert!((y[1] - x.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_backward_stops() {
        let r = integrate_to(|_, y: &[f64; 1]| [y[0]], 1.0, [1.0], &[0.5], 1e-10, 0.1);
        assert!(r.is_err());
    }
}
