//! Property-based checks of the solver invariants on randomized spectra.

use l2div::engine::{self, system_from_spectrum};
use l2div::io::parse_grid_spec;
use l2div::selection::{loss_curve, relative_error};
use nalgebra::DVector;
use proptest::prelude::*;

fn spectrum() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|r| {
        (
            proptest::collection::vec(0.05f64..20.0, r),
            proptest::collection::vec(-3.0f64..3.0, r),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Refitting at the induced radius recovers lambda and the coefficients.
    #[test]
    fn duality_round_trip((c, z) in spectrum(), lambda in 1e-3f64..1e3) {
        let sys = system_from_spectrum(&c);
        let y = DVector::from_column_slice(&z);
        let pf = engine::fit_penalty(&sys, &y, lambda).unwrap();
        prop_assume!(pf.rho_induced > 1e-12);
        let cf = engine::fit_constraint(&sys, &y, pf.rho_induced).unwrap();
        prop_assert!(cf.active);
        prop_assert!((cf.lambda_star - lambda).abs() <= 1e-6 * lambda);
        prop_assert!((&cf.gamma - &pf.gamma).abs().max() <= 1e-8);
    }

    /// The divergence decreases in lambda and stays in (d - r, d].
    #[test]
    fn div_lambda_monotone_and_bounded((c, _z) in spectrum()) {
        let sys = system_from_spectrum(&c);
        let d = sys.d as f64;
        let r = sys.rank as f64;
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let lambda = 10f64.powf(-3.0 + 0.5 * k as f64);
            let dv = engine::div_lambda(&sys, lambda).unwrap();
            prop_assert!(dv > d - r && dv <= d);
            prop_assert!(dv < prev + 1e-12);
            prev = dv;
        }
    }

    /// The induced radius decreases in lambda within a fit sequence.
    #[test]
    fn rho_induced_decreases((c, z) in spectrum(), shift in 0.1f64..5.0) {
        let sys = system_from_spectrum(&c);
        let y = DVector::from_column_slice(&z).add_scalar(shift);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let lambda = 10f64.powf(-2.0 + 0.5 * k as f64);
            let pf = engine::fit_penalty(&sys, &y, lambda).unwrap();
            prop_assert!(pf.rho_induced <= prev + 1e-12);
            prev = pf.rho_induced;
        }
    }

    /// Active constraint fits keep div(rho) in (d - r, d - 1].
    #[test]
    fn div_rho_bounded((c, z) in spectrum()) {
        let sys = system_from_spectrum(&c);
        let y = DVector::from_fn(c.len(), |j, _| z[j].abs() + 0.2);
        let full: f64 = (0..c.len()).map(|j| c[j] * y[j] * y[j]).sum();
        let fit = engine::fit_constraint(&sys, &y, full * 0.25).unwrap();
        prop_assert!(fit.active);
        let d = sys.d as f64;
        let r = sys.rank as f64;
        prop_assert!(fit.div_rho > d - r);
        prop_assert!(fit.div_rho <= d - 1.0 + 1e-9);
    }

    /// Normalized loss positions always land in [0, 100].
    #[test]
    fn relative_error_in_range(
        mus in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 2..20),
        pick in 0usize..20,
    ) {
        let pick = pick % mus.len();
        let truth = DVector::from_column_slice(&[0.5, -0.5, 1.0, 0.0]);
        let fitted: Vec<DVector<f64>> = mus.iter().map(|m| DVector::from_column_slice(m)).collect();
        let rho: Vec<f64> = (0..fitted.len()).map(|k| 1.0 / (k + 1) as f64).collect();
        let curve = loss_curve(&rho, &fitted, &truth).unwrap();
        prop_assume!(curve.max_loss > curve.min_loss);
        let e = relative_error(curve.loss[pick], &curve).unwrap();
        prop_assert!((0.0..=100.0).contains(&e));
    }

    /// The grid-spec parser never panics on arbitrary input.
    #[test]
    fn grid_spec_never_panics(s in ".{0,40}") {
        let _ = parse_grid_spec(&s);
    }
}
