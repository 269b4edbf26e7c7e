//! Independent numerical checks of the analytic divergence formulas.
//!
//! Nothing in this module reuses the closed-form divergence expressions it is
//! meant to verify: the finite-difference oracle perturbs the data, the
//! Monte-Carlo oracle estimates the covariance penalty directly, the trace
//! oracle forms the hat matrix densely, and the geometric oracle solves the
//! fundamental-form eigenproblem on the constraint boundary.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::engine::{ConstraintFit, DrSystem};
use crate::error::{Error, Result};
use crate::problem::RegressionProblem;

/// Step size for the central-difference divergence, scaled to the data.
pub fn default_fd_step(y: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + y.amax())
}

/// Central-difference divergence of a refitting procedure at fixed tuning.
///
/// For constraint fits the caller's closure must hold rho fixed across the
/// perturbations; that is what defines div(rho).
pub fn fd_divergence<F>(refit: F, y: &DVector<f64>, h: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut up = y.clone();
        up[i] += h;
        let mut dn = y.clone();
        dn[i] -= h;
        let mu_up = refit(&up)?;
        let mu_dn = refit(&dn)?;
        total += (mu_up[i] - mu_dn[i]) / (2.0 * h);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct DfEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
}

/// Monte-Carlo degrees of freedom via the covariance penalty.
///
/// `generate` must be a pure function of the replicate index (seeded streams
/// live in the caller) producing a response with mean `mu_true`. The standard
/// error is a delete-one jackknife over replicates.
pub fn mc_degrees_of_freedom<G, F>(
    mu_true: &DVector<f64>,
    sigma2: f64,
    generate: G,
    fitter: F,
    m_reps: usize,
) -> Result<DfEstimate>
where
    G: Fn(usize) -> DVector<f64> + Sync,
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    if m_reps < 100 {
        return Err(Error::InsufficientReplicates(100, m_reps));
    }
    let n = mu_true.len();
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..m_reps)
        .into_par_iter()
        .map(|m| {
            let y = generate(m);
            let mu_hat = fitter(&y)?;
            Ok((y, mu_hat))
        })
        .collect::<Result<Vec<_>>>()?;

    // per-coordinate sufficient statistics for the sample covariance
    let mf = m_reps as f64;
    let mut sum_a: DVector<f64> = DVector::zeros(n); // residual y - mu_true
    let mut sum_b: DVector<f64> = DVector::zeros(n); // fitted value
    let mut sum_ab: DVector<f64> = DVector::zeros(n);
    for (y, mu_hat) in &pairs {
        for i in 0..n {
            let a = y[i] - mu_true[i];
            sum_a[i] += a;
            sum_b[i] += mu_hat[i];
            sum_ab[i] += a * mu_hat[i];
        }
    }
    let cov_total: f64 = (0..n)
        .map(|i| (sum_ab[i] - sum_a[i] * sum_b[i] / mf) / (mf - 1.0))
        .sum();
    let estimate = cov_total / sigma2;

    // delete-one jackknife from the same sufficient statistics
    let mut loo = Vec::with_capacity(m_reps);
    for (y, mu_hat) in &pairs {
        let mut cov = 0.0;
        for i in 0..n {
            let a = y[i] - mu_true[i];
            let sa = sum_a[i] - a;
            let sb = sum_b[i] - mu_hat[i];
            let sab = sum_ab[i] - a * mu_hat[i];
            cov += (sab - sa * sb / (mf - 1.0)) / (mf - 2.0);
        }
        loo.push(cov / sigma2);
    }
    let loo_mean = loo.iter().sum::<f64>() / mf;
    let var = (mf - 1.0) / mf * loo.iter().map(|&v| (v - loo_mean).powi(2)).sum::<f64>();
    Ok(DfEstimate {
        estimate,
        std_error: var.sqrt(),
        replicates: m_reps,
    })
}

const TRACE_DIM_GUARD: usize = 200;

/// Trace of the explicitly formed hat matrix `N (N'N + lambda Omega)^{-1} N'`.
pub fn trace_hat_direct(problem: &RegressionProblem, lambda: f64) -> Result<f64> {
    let d = problem.d();
    if d > TRACE_DIM_GUARD {
        return Err(Error::ProblemTooLarge(d, TRACE_DIM_GUARD));
    }
    let ntn = problem.design.transpose() * &problem.design;
    let a = &ntn + &problem.penalty * lambda;
    // trace(N A^{-1} N') = ||L^{-1} N'||_F^2 with A = L L'; the Cholesky
    // route keeps the trace accurate on poorly conditioned designs where an
    // explicit inverse loses digits
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let mut w = problem.design.transpose();
    chol.l().solve_lower_triangular_mut(&mut w);
    Ok(w.iter().map(|&v| v * v).sum())
}

/// Polar chart of the constraint boundary at an active solution.
#[derive(Debug, Clone)]
pub struct PolarChart {
    pub theta: DVector<f64>,
    /// Normal vector to the boundary at the solution (first r coordinates).
    pub nu: DVector<f64>,
    /// r x (r-1) tangent-frame matrix (the unweighted v0 columns).
    pub l_matrix: DMatrix<f64>,
    pub g11: DMatrix<f64>,
    pub h11: DMatrix<f64>,
}

const SIN_GUARD: f64 = 1e-6;

/// Build the polar chart at a boundary point `gamma` with `gamma' C gamma = rho`.
pub fn polar_chart(sys: &DrSystem, gamma: &DVector<f64>, rho: f64, tau: f64) -> Result<PolarChart> {
    let r = sys.rank;
    assert!(r >= 2, "chart needs at least two penalized directions");
    let sqrt_rho = rho.sqrt();
    // unit sphere coordinates w_j = sqrt(c_j) gamma_j / sqrt(rho)
    let w = DVector::from_fn(r, |j, _| sys.c[j].sqrt() * gamma[j] / sqrt_rho);

    // inverse spherical transform, cos-leading convention
    let mut theta = DVector::zeros(r - 1);
    for j in 0..r - 1 {
        if j + 2 == r {
            theta[j] = w[r - 1].atan2(w[r - 2]);
        } else {
            let tail: f64 = (j + 1..r).map(|l| w[l] * w[l]).sum::<f64>().sqrt();
            theta[j] = tail.atan2(w[j]);
        }
    }
    for j in 0..r.saturating_sub(2) {
        if theta[j].sin().abs() < SIN_GUARD {
            return Err(Error::SingularChart(j + 1));
        }
    }

    let sin = |j: usize| theta[j].sin();
    let cos = |j: usize| theta[j].cos();
    // prefix[j] = prod_{l<j} sin(theta_l)
    let mut prefix = vec![1.0; r];
    for j in 1..r {
        prefix[j] = prefix[j - 1] * sin(j - 1);
    }

    // columns of L: sqrt(rho) * prefix_j * (0_{j-1}; v0(theta_j..theta_{r-1}))
    let mut l = DMatrix::zeros(r, r - 1);
    for j in 0..r - 1 {
        let scale = sqrt_rho * prefix[j];
        l[(j, j)] = -scale * sin(j);
        for i in j + 1..r {
            // cos(theta_j) * prod_{l in (j, i)} sin(theta_l) * (cos(theta_i) or tail)
            let mut v = cos(j);
            for t in j + 1..i {
                v *= sin(t);
            }
            if i < r - 1 {
                v *= cos(i);
            }
            l[(i, j)] = scale * v;
        }
    }

    let nu = DVector::from_fn(r, |j, _| sys.c[j].sqrt() * w[j]);
    let inv_c = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            1.0 / sys.c[i]
        } else {
            0.0
        }
    });
    let mut g11 = l.transpose() * inv_c * &l;
    let g11t = g11.transpose();
    g11 += g11t;
    g11 *= 0.5;
    let scale = tau / (sqrt_rho * nu.norm());
    let mut h11 = l.transpose() * &l * scale;
    let h11t = h11.transpose();
    h11 += h11t;
    h11 *= 0.5;

    Ok(PolarChart {
        theta,
        nu,
        l_matrix: l,
        g11,
        h11,
    })
}

impl PolarChart {
    /// Boundary point reconstructed from the chart: `sqrt(rho) u(theta)` in
    /// the original gamma coordinates (first r components).
    pub fn reconstruct(&self, sys: &DrSystem, rho: f64) -> DVector<f64> {
        let r = sys.rank;
        let mut prefix = 1.0;
        let mut out = DVector::zeros(r);
        for j in 0..r {
            let dir = if j < r - 1 {
                self.theta[j].cos()
            } else {
                1.0
            };
            out[j] = rho.sqrt() * prefix * dir / sys.c[j].sqrt();
            if j < r - 1 {
                prefix *= self.theta[j].sin();
            }
        }
        out
    }
}

/// Eigenvalues of the pencil `det(H11 - phi G11) = 0`, sorted descending.
///
/// This is the authoritative geometric route to the phi values and serves to
/// adjudicate the closed-form expression.
pub fn geometric_phi(sys: &DrSystem, fit: &ConstraintFit) -> Result<DVector<f64>> {
    if !fit.active {
        return Err(Error::InactiveFit);
    }
    let chart = polar_chart(sys, &fit.gamma, fit.rho, fit.tau)?;
    pencil_eigenvalues(&chart.h11, &chart.g11)
}

/// Symmetric-definite generalized eigenproblem via Cholesky whitening.
pub fn pencil_eigenvalues(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = g.clone().cholesky().ok_or(Error::NonPdFirstForm)?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or(Error::NonPdFirstForm)?;
    let mut a = &linv * h * linv.transpose();
    let at = a.transpose();
    a += at;
    a *= 0.5;
    let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(DVector::from_vec(ev))
}
