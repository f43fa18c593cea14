//! Invariants under randomized inputs.

use std::sync::Arc;

use proptest::prelude::*;

use kinexus::bgp::{gamma_from_profile, SigmaRule};
use kinexus::cli::output::{fmt_f, thin_indices};
use kinexus::diagnostics::{fit_line, survival};
use kinexus::hjb::{compute_gain, optimal_control};
use kinexus::kinetic::{cdf, first_moment, step_density_with};
use kinexus::{build_mesh, DensityField, Integrator, LearningTech, Mesh, Spacing, ValueField};

fn mesh_strategy() -> impl Strategy<Value = Arc<Mesh>> {
    (prop_oneof![Just(Spacing::Linear), Just(Spacing::Logarithmic)], 5usize..80).prop_map(|(spacing, n)| {
        let (lo, hi) = match spacing {
            Spacing::Linear => (0.0, 3.0),
            Spacing::Logarithmic => (1e-3, 1e3),
        };
        Arc::new(build_mesh(spacing, lo, hi, n).unwrap())
    })
}

/// A mesh, a unit-mass density on it and per-node rates in `[0, 1]`.
fn state() -> impl Strategy<Value = (DensityField, Vec<f64>)> {
    mesh_strategy().prop_flat_map(|mesh| {
        let n = mesh.len();
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            Just(mesh),
        )
            .prop_filter_map("non-zero density", |(f, alpha, mesh)| {
                let field = DensityField::new(mesh, f).ok()?;
                (field.mass() > 1e-6).then(|| (field.renormalized(1.0).unwrap(), alpha))
            })
    })
}

fn integrator() -> impl Strategy<Value = Integrator> {
    prop_oneof![
        Just(Integrator::ForwardEuler),
        Just(Integrator::SspRk2),
        Just(Integrator::SspRk3)
    ]
}

proptest! {
    #[test]
    fn a_step_conserves_mass_and_moves_mass_up(
        (f, alpha) in state(),
        beta in 0.0f64..=1.0,
        dt_frac in 0.01f64..0.99,
        scheme in integrator(),
    ) {
        let dt = dt_frac / (1.0 + beta);
        let g = step_density_with(&f, &alpha, beta, dt, scheme).unwrap();
        prop_assert!((g.mass() - f.mass()).abs() <= 1e-13);
        prop_assert!(g.values().iter().all(|v| *v >= 0.0));
        prop_assert!(first_moment(&g) >= first_moment(&f) - 1e-13);
        for (before, after) in survival(&f).iter().zip(&survival(&g)) {
            prop_assert!(after >= &(before - 1e-13));
        }
        let c = cdf(&g);
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn step_beyond_the_bound_is_rejected((f, alpha) in state(), beta in 0.0f64..=1.0) {
        let max_alpha = alpha.iter().cloned().fold(0.0, f64::max);
        prop_assume!(max_alpha > 0.0);
        let dt = 1.01 / (max_alpha * (1.0 + beta));
        prop_assert!(step_density_with(&f, &alpha, beta, dt, Integrator::ForwardEuler).is_err());
    }

    #[test]
    fn closed_form_control_beats_every_effort(
        z in 1e-3f64..1e4,
        b in 0.0f64..1e5,
        alpha0 in 0.01f64..1.0,
        n in 0.01f64..0.99,
        s in 0.0f64..=1.0,
    ) {
        let tech = LearningTech::PowerLaw { alpha0, n };
        let c = optimal_control(z, b, &tech).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.s));
        let best = (1.0 - c.s) * z + c.alpha * b;
        let other = (1.0 - s) * z + alpha0 * s.powf(n) * b;
        prop_assert!(best >= other - 1e-12 * (1.0 + other.abs()));
    }

    #[test]
    fn gain_of_a_monotone_value_is_non_negative_and_non_increasing(
        (f, increments) in state(),
    ) {
        let mut acc = 0.0;
        let v: Vec<f64> = increments.iter().map(|d| { acc += d; acc }).collect();
        let value = ValueField::new(f.mesh().clone(), v).unwrap();
        let gain = compute_gain(&value, &f).unwrap();
        let b = gain.values();
        prop_assert!(b.iter().all(|x| *x >= 0.0));
        prop_assert!(b.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(b[b.len() - 1], 0.0);
    }

    #[test]
    fn growth_rate_scales_with_theta((f, sigma) in state(), theta in 0.1f64..2.0) {
        let tech = LearningTech::PowerLaw { alpha0: 0.0849, n: 0.3 };
        let mesh = f.mesh();
        let one = gamma_from_profile(f.values(), &sigma, &tech, 1.0, mesh).unwrap();
        let scaled = gamma_from_profile(f.values(), &sigma, &tech, theta, mesh).unwrap();
        prop_assert!((scaled - theta * one).abs() <= 1e-14 * (1.0 + one.abs()));
    }

    #[test]
    fn step_strategy_is_admissible(
        x0 in 1e-3f64..10.0,
        low in 0.0f64..1.0,
        ramp in 0.0f64..2.0,
        xs in prop::collection::vec(1e-4f64..1e4, 2..50),
    ) {
        let rule = SigmaRule::Step { x0, low, ramp };
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let values: Vec<f64> = xs.iter().map(|&x| rule.value(x)).collect();
        prop_assert!(values.iter().all(|v| (low..=1.0).contains(v)));
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
        for (&x, &v) in xs.iter().zip(&values) {
            if x <= x0 {
                prop_assert_eq!(v, 1.0);
            }
        }
    }

    #[test]
    fn line_fit_recovers_exact_lines(
        slope in -10.0f64..10.0,
        intercept in -10.0f64..10.0,
        xs in prop::collection::btree_set(-1000i32..1000, 3..40),
    ) {
        let xs: Vec<f64> = xs.into_iter().map(|x| x as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-9 * (1.0 + slope.abs()));
        prop_assert!((fit.intercept - intercept).abs() <= 1e-8 * (1.0 + intercept.abs()));
    }

    #[test]
    fn snapshot_thinning_is_even_and_keeps_the_ends(n in 1usize..5000, max in 2usize..200) {
        let idx = thin_indices(n, max);
        prop_assert!(idx.len() <= max);
        prop_assert_eq!(idx.len(), n.min(max));
        prop_assert_eq!(idx[0], 0);
        prop_assert_eq!(*idx.last().unwrap(), n - 1);
        prop_assert!(idx.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn printed_floats_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(fmt_f(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
