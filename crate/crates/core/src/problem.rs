//! Builders for the four regression families.
//!
//! Every builder produces a `(y, design, penalty)` triple so that one common
//! engine handles smoothing splines, penalized splines, ridge regression and
//! functional linear regression alike. Penalties are explicitly symmetrized
//! and validated as positive semidefinite at construction time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    SmoothingSpline,
    PenalizedSpline,
    Ridge,
    FunctionalLinear,
}

/// Builder parameters carried along for reporting.
#[derive(Debug, Clone, Default)]
pub struct ProblemMeta {
    pub order: Option<usize>,
    pub knots: Vec<f64>,
    pub quadrature_grid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub y: DVector<f64>,
    /// The design matrix N of the quadratic form ||y - N beta||^2.
    pub design: DMatrix<f64>,
    /// Symmetric PSD penalty of the quadratic form beta' Omega beta.
    pub penalty: DMatrix<f64>,
    pub kind: ProblemKind,
    pub abscissae: Option<DVector<f64>>,
    pub meta: ProblemMeta,
}

impl RegressionProblem {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    pub fn penalty_quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        (&self.penalty * beta).dot(beta)
    }
}

/// Precomputed pieces of the RKHS functional regression problem.
#[derive(Debug, Clone)]
pub struct FunctionalDesign {
    pub grid: Vec<f64>,
    pub curves: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub t_mat: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub kernel: KernelId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    /// Reproducing kernel of W2^2[0,1] for the second-derivative seminorm.
    SobolevW22,
}

impl KernelId {
    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "sobolev" | "w22" | "sobolev-w22" => Ok(KernelId::SobolevW22),
            other => Err(Error::KernelError(other.to_string())),
        }
    }

    pub fn eval(self, s: f64, t: f64) -> f64 {
        match self {
            KernelId::SobolevW22 => {
                let k2 = |u: f64| (u * u - u + 1.0 / 6.0) / 2.0;
                let k4 = |u: f64| {
                    let u2 = u * u;
                    (u2 * u2 - 2.0 * u2 * u + u2 - 1.0 / 30.0) / 24.0
                };
                k2(s) * k2(t) - k4((s - t).abs())
            }
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let mt = m.transpose();
    *m += mt;
    *m *= 0.5;
}

fn check_psd(penalty: &DMatrix<f64>) -> Result<()> {
    let eig = penalty.clone().symmetric_eigen();
    let max = eig.eigenvalues.max().max(0.0);
    let min = eig.eigenvalues.min();
    if min < -1e-10 * max.max(1.0) {
        return Err(Error::NonPsdPenalty(min));
    }
    Ok(())
}

fn check_abscissae(x: &[f64]) -> Result<()> {
    for (i, &xi) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&xi) || !xi.is_finite() {
            return Err(Error::DomainError(xi));
        }
        if i > 0 && x[i] <= x[i - 1] {
            return Err(Error::DuplicateAbscissae(i - 1, i));
        }
    }
    Ok(())
}

/// Natural cubic smoothing spline: d = n basis functions, exact curvature
/// penalty with null space {1, x}.
pub fn build_smoothing_spline(x: &[f64], y: &[f64]) -> Result<RegressionProblem> {
    if x.len() < 4 {
        return Err(Error::TooFewPoints(x.len(), 4));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    check_abscissae(x)?;

    let knots = spline::clamped_knots(x);
    let w = spline::natural_transform(&knots, x);
    let colloc = spline::collocation(&knots, 0, x);
    let design = &colloc * &w;
    let gram = spline::second_derivative_gram(&knots, 1);
    let mut penalty = w.transpose() * gram * &w;
    symmetrize(&mut penalty);
    check_psd(&penalty)?;

    Ok(RegressionProblem {
        y: DVector::from_column_slice(y),
        design,
        penalty,
        kind: ProblemKind::SmoothingSpline,
        abscissae: Some(DVector::from_column_slice(x)),
        meta: ProblemMeta::default(),
    })
}

/// Truncated-power penalized spline of order `p` with ridge penalty on the
/// knot coefficients.
pub fn build_penalized_spline(
    x: &[f64],
    y: &[f64],
    p: usize,
    knots: &[f64],
) -> Result<RegressionProblem> {
    if p < 1 {
        return Err(Error::KnotOrderError);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (xmin, xmax) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    for (i, &k) in knots.iter().enumerate() {
        if !k.is_finite() || k <= xmin || k >= xmax {
            return Err(Error::KnotOrderError);
        }
        if i > 0 && k <= knots[i - 1] {
            return Err(Error::KnotOrderError);
        }
    }

    let n = x.len();
    let big_k = knots.len();
    let d = p + 1 + big_k;
    let mut design = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..=p {
            design[(i, j)] = x[i].powi(j as i32);
        }
        for (k, &kappa) in knots.iter().enumerate() {
            design[(i, p + 1 + k)] = (x[i] - kappa).max(0.0).powi(p as i32);
        }
    }
    let mut penalty = DMatrix::zeros(d, d);
    for k in 0..big_k {
        penalty[(p + 1 + k, p + 1 + k)] = 1.0;
    }

    Ok(RegressionProblem {
        y: DVector::from_column_slice(y),
        design,
        penalty,
        kind: ProblemKind::PenalizedSpline,
        abscissae: None,
        meta: ProblemMeta {
            order: Some(p),
            knots: knots.to_vec(),
            quadrature_grid: Vec::new(),
        },
    })
}

/// Ridge regression with an unpenalized intercept.
pub fn build_ridge(x: &DMatrix<f64>, y: &[f64]) -> Result<RegressionProblem> {
    let (n, p) = (x.nrows(), x.ncols());
    if n != y.len() {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < p + 1 {
        return Err(Error::TooFewPoints(n, p + 1));
    }
    let mut design = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..p {
            design[(i, j + 1)] = x[(i, j)];
        }
    }
    let mut penalty = DMatrix::identity(p + 1, p + 1);
    penalty[(0, 0)] = 0.0;

    Ok(RegressionProblem {
        y: DVector::from_column_slice(y),
        design,
        penalty,
        kind: ProblemKind::Ridge,
        abscissae: None,
        meta: ProblemMeta::default(),
    })
}

/// Trapezoid weights on a uniform grid.
fn trapezoid_weights(m: usize, h: f64) -> DVector<f64> {
    let mut w = DVector::from_element(m, h);
    w[0] = h / 2.0;
    w[m - 1] = h / 2.0;
    w
}

/// Orthonormal complement of the column span of `u` (columns orthonormal),
/// built by Gram–Schmidt over the coordinate axes in order.
pub(crate) fn orthonormal_complement(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let target = n - u.ncols();
    let mut cols: Vec<DVector<f64>> = u.column_iter().map(|c| c.clone_owned()).collect();
    let mut out = DMatrix::zeros(n, target);
    let mut found = 0;
    for i in 0..n {
        if found == target {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for c in &cols {
            let proj = c.dot(&v);
            v.axpy(-proj, c, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= norm;
            out.column_mut(found).copy_from(&v);
            cols.push(v);
            found += 1;
        }
    }
    assert_eq!(found, target, "complement construction fell short");
    out
}

/// RKHS functional linear regression on sampled curves.
pub fn build_functional(
    curves: &DMatrix<f64>,
    grid: &[f64],
    y: &[f64],
    kernel: KernelId,
) -> Result<(RegressionProblem, FunctionalDesign)> {
    let (n, m) = (curves.nrows(), curves.ncols());
    if m < 21 || grid.len() != m {
        return Err(Error::GridError(21));
    }
    if n < 2 || y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    let h = 1.0 / (m - 1) as f64;
    for (i, &g) in grid.iter().enumerate() {
        if (g - i as f64 * h).abs() > 1e-9 {
            return Err(Error::GridError(21));
        }
    }

    // center the curves
    let mean = curves.row_mean();
    let mut centered = curves.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }

    let w = trapezoid_weights(m, h);
    // A = centered * diag(w): quadrature-weighted curves
    let mut a = centered.clone();
    for (j, mut col) in a.column_iter_mut().enumerate() {
        col *= w[j];
    }
    let kmat = DMatrix::from_fn(m, m, |i, j| kernel.eval(grid[i], grid[j]));
    let mut sigma = &a * kmat * a.transpose();
    symmetrize(&mut sigma);

    // T_{ij} = ∫ centered_i(t) t^{j-1} dt
    let moments = DMatrix::from_fn(m, 2, |i, j| grid[i].powi(j as i32));
    let t_mat = &a * &moments;

    if sigma.abs().max() < 1e-14 && t_mat.abs().max() < 1e-14 {
        return Err(Error::DegenerateDesign);
    }

    // thin SVD of T gives the orthonormal range; Q2 spans the part of its
    // complement away from the constant vector. The constant direction lies
    // in the complement of range(T) (T's columns sum to zero) and is
    // annihilated by Sigma (centered curves), so keeping it in Q2 would make
    // the design singular by construction; it re-enters as the explicit
    // intercept column instead.
    let tsvd = t_mat.clone().svd(true, false);
    let tu = tsvd.u.as_ref().expect("svd u requested");
    let ttol = tsvd.singular_values.max() * 1e-12;
    let trank = tsvd.singular_values.iter().filter(|&&s| s > ttol).count();
    let mut pinned = DMatrix::zeros(n, trank + 1);
    pinned
        .columns_mut(0, trank)
        .copy_from(&tu.columns(0, trank));
    pinned
        .column_mut(trank)
        .copy_from(&DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    let q2 = orthonormal_complement(&pinned);
    let q2 = if n >= 3 && q2.ncols() > n - 3 {
        q2.columns(0, n - 3).clone_owned()
    } else {
        q2
    };
    let n_eta = q2.ncols();

    // design (Sigma Q2 : T : 1), penalty diag(Q2' Sigma Q2, 0)
    let d = n_eta + 3;
    let mut design = DMatrix::zeros(n, d);
    if n_eta > 0 {
        design.columns_mut(0, n_eta).copy_from(&(&sigma * &q2));
    }
    design.columns_mut(n_eta, 2).copy_from(&t_mat);
    design
        .column_mut(n_eta + 2)
        .copy_from(&DVector::from_element(n, 1.0));
    let mut penalty = DMatrix::zeros(d, d);
    if n_eta > 0 {
        let mut block = q2.transpose() * &sigma * &q2;
        symmetrize(&mut block);
        penalty.view_mut((0, 0), (n_eta, n_eta)).copy_from(&block);
    }
    check_psd(&penalty)?;

    let problem = RegressionProblem {
        y: DVector::from_column_slice(y),
        design,
        penalty,
        kind: ProblemKind::FunctionalLinear,
        abscissae: None,
        meta: ProblemMeta {
            order: None,
            knots: Vec::new(),
            quadrature_grid: grid.to_vec(),
        },
    };
    let fd = FunctionalDesign {
        grid: grid.to_vec(),
        curves: curves.clone(),
        sigma,
        t_mat,
        q2,
        kernel,
    };
    Ok((problem, fd))
}
