//! Demmler–Reinsch decomposition and the two indexings of the fit.
//!
//! The decomposition simultaneously orthogonalizes the least-squares and
//! penalty quadratic forms: with `N = QR` and `U C U' = R^{-T} Omega R^{-1}`,
//! the columns of `Z = QU` are orthonormal and the penalty becomes diagonal.
//! Both the penalty-form solution (linear shrinkage `gamma_j / (1 + lambda
//! c_j)`) and the constraint-form solution (projection onto the ellipsoid
//! `gamma' C gamma <= rho`) are then one-dimensional per component, and the
//! divergence is available in closed form in either indexing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::RegressionProblem;

/// Relative eigenvalue threshold below which penalized directions are
/// declared exactly unpenalized.
pub const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DrSystem {
    /// n x d with orthonormal columns spanning col(N).
    pub z: DMatrix<f64>,
    /// Penalty spectrum, sorted non-increasing; entries past `rank` are zero.
    pub c: DVector<f64>,
    /// Number of strictly positive penalty eigenvalues.
    pub rank: usize,
    /// d x d matrix B'U mapping gamma back to beta.
    pub back_transform: DMatrix<f64>,
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone)]
pub struct PenaltyFit {
    pub lambda: f64,
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    pub mu: DVector<f64>,
    pub rss: f64,
    pub div_lambda: f64,
    /// gamma' C gamma: the constraint radius this fit induces.
    pub rho_induced: f64,
}

#[derive(Debug, Clone)]
pub struct ConstraintFit {
    pub rho: f64,
    /// Whether the solution lies on the constraint boundary.
    pub active: bool,
    /// Lagrange multiplier; zero when inactive.
    pub lambda_star: f64,
    pub gamma: DVector<f64>,
    /// Unconstrained solution Z'y.
    pub gamma0: DVector<f64>,
    /// ||gamma0 - gamma||_2.
    pub tau: f64,
    /// phi_1..phi_{r-1}; empty when inactive.
    pub phi: DVector<f64>,
    pub mu: DVector<f64>,
    pub rss: f64,
    pub div_rho: f64,
    /// Set when a 0/0 in the phi formula was resolved by its continuity limit.
    pub degenerate_phi: bool,
}

/// Demmler–Reinsch decomposition via thin QR of the design.
///
/// Using `B = R^{-T}` avoids forming `N'N` and squaring the condition number.
pub fn decompose(problem: &RegressionProblem) -> Result<DrSystem> {
    let n = problem.n();
    let d = problem.d();
    if n < d {
        return Err(Error::RankDeficientDesign);
    }
    let qr = problem.design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rmax = (0..d).map(|j| r[(j, j)].abs()).fold(0.0_f64, f64::max);
    if (0..d).any(|j| r[(j, j)].abs() < 1e-10 * rmax) || rmax == 0.0 {
        return Err(Error::RankDeficientDesign);
    }
    let r_inv = r
        .try_inverse()
        .ok_or(Error::RankDeficientDesign)?;
    let mut m = r_inv.transpose() * &problem.penalty * &r_inv;
    let mt = m.transpose();
    m += mt;
    m *= 0.5;

    let eig = m.symmetric_eigen();
    let cmax = eig.eigenvalues.max().max(0.0);
    if eig.eigenvalues.min() < -1e-8 * cmax.max(1.0) {
        return Err(Error::NonPsdPenalty(eig.eigenvalues.min()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let mut c = DVector::zeros(d);
    let mut u = DMatrix::zeros(d, d);
    for (k, &j) in order.iter().enumerate() {
        let ev = eig.eigenvalues[j];
        c[k] = if ev > RANK_EPS * cmax { ev } else { 0.0 };
        u.column_mut(k).copy_from(&eig.eigenvectors.column(j));
    }
    let rank = c.iter().filter(|&&v| v > 0.0).count();

    Ok(DrSystem {
        z: q * &u,
        c,
        rank,
        back_transform: r_inv * u,
        n,
        d,
    })
}

impl DrSystem {
    /// Fitted values for a coefficient vector in the orthonormalized basis.
    pub fn mu(&self, gamma: &DVector<f64>) -> DVector<f64> {
        &self.z * gamma
    }
}

/// Solve the penalty-form problem at a fixed lambda.
pub fn fit_penalty(sys: &DrSystem, y: &DVector<f64>, lambda: f64) -> Result<PenaltyFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda));
    }
    let z = sys.z.transpose() * y;
    let gamma = DVector::from_fn(sys.d, |j, _| z[j] / (1.0 + lambda * sys.c[j]));
    let beta = &sys.back_transform * &gamma;
    let mu = sys.mu(&gamma);
    let resid = y - &mu;
    let rho_induced = (0..sys.d).map(|j| sys.c[j] * gamma[j] * gamma[j]).sum();
    Ok(PenaltyFit {
        lambda,
        div_lambda: div_lambda(sys, lambda)?,
        gamma,
        beta,
        mu,
        rss: resid.norm_squared(),
        rho_induced,
    })
}

/// Divergence in the lambda indexing: the full d-term trace of the hat
/// matrix, `(d - r) + sum_{j<=r} 1/(1 + lambda c_j)`.
pub fn div_lambda(sys: &DrSystem, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda));
    }
    Ok(hat_trace_identity_check(sys, lambda))
}

/// `sum_{j=1}^d 1/(1 + lambda c_j)`, exposed for the trace-identity tests.
pub fn hat_trace_identity_check(sys: &DrSystem, lambda: f64) -> f64 {
    (0..sys.d).map(|j| 1.0 / (1.0 + lambda * sys.c[j])).sum()
}

/// Constraint functional `g(lambda) = sum c_j z_j^2 / (1 + lambda c_j)^2`,
/// strictly decreasing in lambda wherever some penalized z_j is nonzero.
fn constraint_radius(c: &DVector<f64>, z: &DVector<f64>, lambda: f64) -> f64 {
    (0..c.len())
        .map(|j| {
            let s = 1.0 + lambda * c[j];
            c[j] * z[j] * z[j] / (s * s)
        })
        .sum()
}

/// Solve the constraint-form problem at a fixed rho.
pub fn fit_constraint(sys: &DrSystem, y: &DVector<f64>, rho: f64) -> Result<ConstraintFit> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveRho(rho));
    }
    let gamma0 = sys.z.transpose() * y;
    let rho0 = constraint_radius(&sys.c, &gamma0, 0.0);
    if rho0 <= rho {
        // interior solution: the unconstrained fit satisfies the constraint
        let mu = sys.mu(&gamma0);
        let rss = (y - &mu).norm_squared();
        return Ok(ConstraintFit {
            rho,
            active: false,
            lambda_star: 0.0,
            gamma: gamma0.clone(),
            gamma0,
            tau: 0.0,
            phi: DVector::zeros(0),
            mu,
            rss,
            div_rho: sys.d as f64,
            degenerate_phi: false,
        });
    }

    // bracket by doubling, then bisect; g is strictly decreasing
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while constraint_radius(&sys.c, &gamma0, hi) > rho {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(Error::ConvergenceFailure);
        }
    }
    let mut lambda_star = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..200 {
        lambda_star = 0.5 * (lo + hi);
        let g = constraint_radius(&sys.c, &gamma0, lambda_star);
        if ((g - rho) / rho).abs() <= 1e-12 {
            converged = true;
            break;
        }
        if g > rho {
            lo = lambda_star;
        } else {
            hi = lambda_star;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure);
    }

    let gamma = DVector::from_fn(sys.d, |j, _| gamma0[j] / (1.0 + lambda_star * sys.c[j]));
    let tau = (&gamma0 - &gamma).norm();
    let (phi, degenerate_phi) = phi_values(sys, &gamma, tau)?;
    let mu = sys.mu(&gamma);
    let rss = (y - &mu).norm_squared();
    let mut fit = ConstraintFit {
        rho,
        active: true,
        lambda_star,
        gamma,
        gamma0,
        tau,
        phi,
        mu,
        rss,
        div_rho: 0.0,
        degenerate_phi,
    };
    fit.div_rho = div_rho(&fit, sys)?;
    Ok(fit)
}

/// Closed-form phi_j for a boundary solution.
///
/// Each phi couples the adjacent spectrum pair (j, j+1). A 0/0 (both adjacent
/// penalized components zero) is replaced by the continuity limit along rays
/// with equal component magnitudes, and flagged.
pub fn phi_values(
    sys: &DrSystem,
    gamma: &DVector<f64>,
    tau: f64,
) -> Result<(DVector<f64>, bool)> {
    let r = sys.rank;
    let scale_sq: f64 = (0..r).map(|l| gamma[l] * gamma[l] * sys.c[l] * sys.c[l]).sum();
    if scale_sq <= 0.0 {
        return Err(Error::AllPenalizedComponentsZero);
    }
    let prefix = tau / scale_sq.sqrt();
    let mut degenerate = false;
    let phi = DVector::from_fn(r.saturating_sub(1), |j, _| {
        let (cj, ck) = (sys.c[j], sys.c[j + 1]);
        let (gj2, gk2) = (gamma[j] * gamma[j], gamma[j + 1] * gamma[j + 1]);
        let den = cj * cj * gj2 + ck * ck * gk2;
        let ratio = if den > 0.0 {
            (cj * cj * ck * gj2 + cj * ck * ck * gk2) / den
        } else {
            degenerate = true;
            cj * ck * (cj + ck) / (cj * cj + ck * ck)
        };
        prefix * ratio
    });
    Ok((phi, degenerate))
}

/// Divergence in the rho indexing, `(d - r) + sum_{j=1}^{r-1} 1/(1 + phi_j)`.
pub fn div_rho(fit: &ConstraintFit, sys: &DrSystem) -> Result<f64> {
    if !fit.active {
        return Err(Error::InactiveFit);
    }
    let base = (sys.d - sys.rank) as f64;
    Ok(base + fit.phi.iter().map(|&p| 1.0 / (1.0 + p)).sum::<f64>())
}

/// Test-support constructor for a system given directly in the orthonormal
/// coordinates (Z = I up to padding, back transform identity).
pub fn system_from_spectrum(c: &[f64]) -> DrSystem {
    let d = c.len();
    let cvec = DVector::from_column_slice(c);
    let rank = c.iter().filter(|&&v| v > 0.0).count();
    DrSystem {
        z: DMatrix::identity(d, d),
        c: cvec,
        rank,
        back_transform: DMatrix::identity(d, d),
        n: d,
        d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_ridge, build_smoothing_spline};
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gu_sites(n: usize) -> Vec<f64> {
        (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect()
    }

    fn random_ridge(seed: u64, n: usize, p: usize) -> (crate::problem::RegressionProblem, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() - 0.5);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let prob = build_ridge(&x, &y).unwrap();
        let yv = prob.y.clone();
        (prob, yv)
    }

    #[test]
    fn decompose_smoothing_spline_rank() {
        let x = gu_sites(100);
        let y: Vec<f64> = x.iter().map(|&t| t.sin()).collect();
        let p = build_smoothing_spline(&x, &y).unwrap();
        let sys = decompose(&p).unwrap();
        assert_eq!(sys.d, 100);
        assert_eq!(sys.rank, 98);
        // orthonormal columns
        let ztz = sys.z.transpose() * &sys.z;
        let err = (&ztz - DMatrix::identity(100, 100)).abs().max();
        assert!(err < 1e-8, "Z'Z deviation {err:e}");
        // N * back_transform = Z
        let err = (&p.design * &sys.back_transform - &sys.z).abs().max();
        assert!(err < 1e-8);
    }

    #[test]
    fn decompose_orthonormal_ridge_spectrum() {
        // X'X = I and columns orthogonal to the intercept: c_j = 1 for j <= p
        let n = 8;
        let p = 3;
        // orthonormalize random columns against the constant column
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() - 0.5);
        let mut cols = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
        let mut x = DMatrix::zeros(n, p);
        for j in 0..p {
            let mut v = raw.column(j).clone_owned();
            for c in &cols {
                let pr = c.dot(&v);
                v.axpy(-pr, c, 1.0);
            }
            v /= v.norm();
            x.column_mut(j).copy_from(&v);
            cols.push(v);
        }
        let y = vec![0.0; n];
        let prob = build_ridge(&x, &y).unwrap();
        let sys = decompose(&prob).unwrap();
        assert_eq!(sys.rank, p);
        for j in 0..p {
            assert!((sys.c[j] - 1.0).abs() < 1e-8, "c[{j}] = {}", sys.c[j]);
        }
    }

    #[test]
    fn zero_penalty_gives_ols_for_any_lambda() {
        let (mut prob, y) = random_ridge(3, 10, 2);
        prob.penalty.fill(0.0);
        let sys = decompose(&prob).unwrap();
        assert_eq!(sys.rank, 0);
        let f0 = fit_penalty(&sys, &y, 0.0).unwrap();
        let f9 = fit_penalty(&sys, &y, 1e9).unwrap();
        assert!((&f0.mu - &f9.mu).abs().max() < 1e-8);
    }

    #[test]
    fn penalty_fit_lambda_zero_is_projection() {
        let (prob, y) = random_ridge(5, 12, 3);
        let sys = decompose(&prob).unwrap();
        let fit = fit_penalty(&sys, &y, 0.0).unwrap();
        assert_eq!(fit.div_lambda, sys.d as f64);
        let proj = &sys.z * (sys.z.transpose() * &y);
        assert!((&fit.mu - proj).abs().max() < 1e-10);
        // mu = N beta as well
        assert!((&prob.design * &fit.beta - &fit.mu).abs().max() < 1e-8);
    }

    #[test]
    fn penalty_fit_huge_lambda_hits_null_space() {
        let (prob, y) = random_ridge(7, 15, 4);
        let sys = decompose(&prob).unwrap();
        let fit = fit_penalty(&sys, &y, 1e12).unwrap();
        let df = fit.div_lambda;
        let want = (sys.d - sys.rank) as f64;
        assert!((df - want).abs() < 1e-6, "df {df} vs {want}");
    }

    #[test]
    fn hand_computed_shrinkage() {
        // d = 3, c = (2,1,0), lambda = 0.5, z = (1,1,1)
        let sys = system_from_spectrum(&[2.0, 1.0, 0.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
        let fit = fit_penalty(&sys, &y, 0.5).unwrap();
        assert!((fit.gamma[0] - 0.5).abs() < 1e-15);
        assert!((fit.gamma[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((fit.gamma[2] - 1.0).abs() < 1e-15);
        assert!((fit.div_lambda - 13.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn div_lambda_hand_values() {
        let sys = system_from_spectrum(&[1.0]);
        assert_eq!(div_lambda(&sys, 0.0).unwrap(), 1.0);
        assert!((div_lambda(&sys, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(div_lambda(&sys, -1.0).is_err());
    }

    #[test]
    fn spherical_constraint_closed_form() {
        let sys = system_from_spectrum(&[1.0, 1.0, 1.0]);
        let y = DVector::from_column_slice(&[2.0, 1.0, 2.0]);
        let fit = fit_constraint(&sys, &y, 1.0).unwrap();
        assert!(fit.active);
        assert!((fit.lambda_star - 2.0).abs() < 1e-9);
        assert!((fit.gamma[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((fit.gamma[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((fit.tau - 2.0).abs() < 1e-9);
        assert!((fit.phi[0] - 2.0).abs() < 1e-8);
        assert!((fit.phi[1] - 2.0).abs() < 1e-8);
        assert!((fit.div_rho - 2.0 / 3.0).abs() < 1e-8);
        // boundary constraint satisfied
        let rho_hat: f64 = (0..3).map(|j| sys.c[j] * fit.gamma[j] * fit.gamma[j]).sum();
        assert!(((rho_hat - 1.0) / 1.0).abs() < 1e-8);
    }

    #[test]
    fn inactive_constraint_returns_ols() {
        let sys = system_from_spectrum(&[1.0, 1.0]);
        let y = DVector::from_column_slice(&[0.1, 0.1]);
        let fit = fit_constraint(&sys, &y, 10.0).unwrap();
        assert!(!fit.active);
        assert_eq!(fit.lambda_star, 0.0);
        assert_eq!(fit.tau, 0.0);
        assert_eq!(fit.div_rho, 2.0);
        assert!(div_rho(&fit, &sys).is_err());
    }

    #[test]
    fn fit_constraint_rejects_bad_rho() {
        let sys = system_from_spectrum(&[1.0]);
        let y = DVector::from_column_slice(&[1.0]);
        assert!(fit_constraint(&sys, &y, 0.0).is_err());
        assert!(fit_constraint(&sys, &y, -1.0).is_err());
        assert!(fit_constraint(&sys, &y, f64::NAN).is_err());
    }

    #[test]
    fn phi_degenerate_pair_takes_limit() {
        let sys = system_from_spectrum(&[1.0, 1.0, 1.0]);
        let gamma = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let (phi, degen) = phi_values(&sys, &gamma, 1.0).unwrap();
        assert!(degen);
        assert!((phi[0] - 1.0).abs() < 1e-12);
        assert!((phi[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_zero_tau_is_zero() {
        let sys = system_from_spectrum(&[2.0, 1.0]);
        let gamma = DVector::from_column_slice(&[1.0, 1.0]);
        let (phi, _) = phi_values(&sys, &gamma, 0.0).unwrap();
        assert_eq!(phi[0], 0.0);
    }

    #[test]
    fn phi_all_zero_components_errors() {
        let sys = system_from_spectrum(&[1.0, 1.0]);
        let gamma = DVector::from_column_slice(&[0.0, 0.0]);
        assert!(matches!(
            phi_values(&sys, &gamma, 1.0),
            Err(Error::AllPenalizedComponentsZero)
        ));
    }

    #[test]
    fn duality_round_trip_ridge() {
        let (prob, y) = random_ridge(23, 20, 4);
        let sys = decompose(&prob).unwrap();
        for k in 0..20 {
            let lambda = 10f64.powf(-3.0 + 6.0 * k as f64 / 19.0);
            let pf = fit_penalty(&sys, &y, lambda).unwrap();
            let cf = fit_constraint(&sys, &y, pf.rho_induced).unwrap();
            assert!(cf.active);
            let rel = ((cf.lambda_star - lambda) / lambda).abs();
            assert!(rel < 1e-6, "lambda {lambda} recovered {}", cf.lambda_star);
            assert!((&cf.mu - &pf.mu).abs().max() < 1e-8);
        }
    }

    #[test]
    fn div_lambda_monotone_and_in_range() {
        let (prob, _) = random_ridge(31, 18, 5);
        let sys = decompose(&prob).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..30 {
            let lambda = 10f64.powf(-4.0 + 8.0 * k as f64 / 29.0);
            let df = div_lambda(&sys, lambda).unwrap();
            assert!(df < prev);
            assert!(df > (sys.d - sys.rank) as f64 && df <= sys.d as f64);
            prev = df;
        }
    }

    #[test]
    fn active_div_rho_range() {
        let (prob, y) = random_ridge(41, 25, 4);
        let sys = decompose(&prob).unwrap();
        let pf = fit_penalty(&sys, &y, 0.7).unwrap();
        let cf = fit_constraint(&sys, &y, pf.rho_induced).unwrap();
        let lo = (sys.d - sys.rank) as f64;
        let hi = (sys.d - 1) as f64;
        assert!(cf.div_rho > lo && cf.div_rho <= hi + 1e-12);
    }

    #[test]
    fn spherical_spectrum_phi_equals_lambda_star() {
        let sys = system_from_spectrum(&[3.0, 3.0, 3.0, 3.0]);
        let y = DVector::from_column_slice(&[1.0, -2.0, 0.5, 1.5]);
        let fit = fit_constraint(&sys, &y, 0.3).unwrap();
        assert!(fit.active);
        for j in 0..fit.phi.len() {
            assert!((fit.phi[j] - fit.lambda_star * 3.0).abs() < 1e-8 * (1.0 + fit.lambda_star));
        }
    }
}
