//! Cubic B-spline machinery for the natural-spline design and penalty.
//!
//! The natural cubic spline family on sites `x_1 < … < x_n` is represented as
//! the span of `n` linear combinations of the `n + 2` cubic B-splines on the
//! clamped knot vector over those sites, restricted to the null space of the
//! boundary conditions `f''(x_1) = f''(x_n) = 0`. The first two combinations
//! are chosen to reproduce the constant and linear functions exactly, so the
//! roughness penalty has an explicit two-dimensional null space.

use nalgebra::{DMatrix, DVector};

const DEGREE: usize = 3;

/// Clamped cubic knot vector over the data sites: each boundary site repeated
/// `DEGREE + 1` times, interior sites once. Yields `n + 2` basis functions.
pub fn clamped_knots(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut t = Vec::with_capacity(n + 2 * DEGREE);
    for _ in 0..=DEGREE {
        t.push(x[0]);
    }
    t.extend_from_slice(&x[1..n - 1]);
    for _ in 0..=DEGREE {
        t.push(x[n - 1]);
    }
    t
}

pub fn n_basis(knots: &[f64]) -> usize {
    knots.len() - DEGREE - 1
}

/// Value of the `order`-th derivative of B-spline `j` of degree `deg` at `x`.
///
/// Plain Cox–de Boor recursion with the standard derivative reduction. The
/// half-open support convention is patched at the right endpoint so the last
/// basis function evaluates to 1 there.
fn bspline_deriv(knots: &[f64], j: usize, deg: usize, order: usize, x: f64) -> f64 {
    if order > 0 {
        if deg == 0 {
            return 0.0;
        }
        let d1 = knots[j + deg] - knots[j];
        let d2 = knots[j + deg + 1] - knots[j + 1];
        let mut v = 0.0;
        if d1 > 0.0 {
            v += bspline_deriv(knots, j, deg - 1, order - 1, x) * deg as f64 / d1;
        }
        if d2 > 0.0 {
            v -= bspline_deriv(knots, j + 1, deg - 1, order - 1, x) * deg as f64 / d2;
        }
        return v;
    }
    if deg == 0 {
        let last = knots[knots.len() - 1];
        let hit = (knots[j] <= x && x < knots[j + 1])
            || (x == last && knots[j] < knots[j + 1] && knots[j + 1] == last);
        return if hit { 1.0 } else { 0.0 };
    }
    let d1 = knots[j + deg] - knots[j];
    let d2 = knots[j + deg + 1] - knots[j + 1];
    let mut v = 0.0;
    if d1 > 0.0 {
        v += (x - knots[j]) / d1 * bspline_deriv(knots, j, deg - 1, 0, x);
    }
    if d2 > 0.0 {
        v += (knots[j + deg + 1] - x) / d2 * bspline_deriv(knots, j + 1, deg - 1, 0, x);
    }
    v
}

/// Row of all basis-function derivative values at `x`.
pub fn basis_row(knots: &[f64], order: usize, x: f64) -> DVector<f64> {
    let nb = n_basis(knots);
    DVector::from_fn(nb, |j, _| bspline_deriv(knots, j, DEGREE, order, x))
}

/// Collocation matrix: `out[i][j] = d^order/dx^order B_j(x_i)`.
pub fn collocation(knots: &[f64], order: usize, x: &[f64]) -> DMatrix<f64> {
    let nb = n_basis(knots);
    let mut m = DMatrix::zeros(x.len(), nb);
    for (i, &xi) in x.iter().enumerate() {
        m.row_mut(i).copy_from(&basis_row(knots, order, xi).transpose());
    }
    m
}

/// Greville abscissae: B-spline coefficients of the identity function.
pub fn greville(knots: &[f64]) -> DVector<f64> {
    let nb = n_basis(knots);
    DVector::from_fn(nb, |j, _| {
        (knots[j + 1] + knots[j + 2] + knots[j + 3]) / 3.0
    })
}

/// Gram matrix of second derivatives, `G[k][l] = ∫ B_k'' B_l''`.
///
/// Second derivatives of cubics are piecewise linear, so the integrand is
/// piecewise quadratic and 2-point Gauss–Legendre per knot interval is exact.
pub fn second_derivative_gram(knots: &[f64], refinement: usize) -> DMatrix<f64> {
    let nb = n_basis(knots);
    let mut g = DMatrix::zeros(nb, nb);
    // distinct breakpoints
    let mut brk: Vec<f64> = Vec::new();
    for &t in knots {
        if brk.last().map_or(true, |&b| t > b) {
            brk.push(t);
        }
    }
    let gauss = 1.0 / 3.0_f64.sqrt();
    for w in brk.windows(2) {
        let (a, b) = (w[0], w[1]);
        let step = (b - a) / refinement as f64;
        for s in 0..refinement {
            let lo = a + step * s as f64;
            let mid = lo + 0.5 * step;
            let half = 0.5 * step;
            for &q in &[mid - half * gauss, mid + half * gauss] {
                let row = basis_row(knots, 2, q);
                // rank-1 accumulation weighted by half the subinterval length
                g.ger(half, &row, &row, 1.0);
            }
        }
    }
    let gt = g.transpose();
    (g + gt) * 0.5
}

/// Basis transform onto the natural boundary conditions.
///
/// Returns an `(n+2) × n` matrix `W` whose first two columns are the B-spline
/// coefficients of `1` and `x`, and whose remaining columns orthonormally
/// complete the null space of the constraint matrix `[B''(x_1); B''(x_n)]`.
pub fn natural_transform(knots: &[f64], x: &[f64]) -> DMatrix<f64> {
    let nb = n_basis(knots);
    let n = x.len();
    let ones = DVector::from_element(nb, 1.0);
    let grev = greville(knots);

    // constraint rows: second derivative at both boundary sites
    let c0 = basis_row(knots, 2, x[0]);
    let c1 = basis_row(knots, 2, x[n - 1]);

    // The null space of A splits as span{1, x} plus its orthogonal remainder.
    // Both constraint rows are orthogonal to span{1, x} (linear functions have
    // no curvature), so the remainder is the orthonormal complement of
    // {rows of A} ∪ {1-coeffs, x-coeffs}, of dimension (n + 2) - 4 = n - 2.
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(4);
    let push_orthonormal = |frame: &mut Vec<DVector<f64>>, v: &DVector<f64>| {
        let mut w = v.clone();
        for f in frame.iter() {
            let p = f.dot(&w);
            w.axpy(-p, f, 1.0);
        }
        let norm = w.norm();
        assert!(norm > 1e-10, "degenerate constraint frame");
        w /= norm;
        frame.push(w);
    };
    push_orthonormal(&mut frame, &c0);
    push_orthonormal(&mut frame, &c1);
    push_orthonormal(&mut frame, &ones);
    push_orthonormal(&mut frame, &grev);

    let mut w = DMatrix::zeros(nb, n);
    w.column_mut(0).copy_from(&ones);
    w.column_mut(1).copy_from(&grev);
    let mut found = 2;
    for i in 0..nb {
        if found == n {
            break;
        }
        let mut v = DVector::zeros(nb);
        v[i] = 1.0;
        for f in &frame {
            let p = f.dot(&v);
            v.axpy(-p, f, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            v /= norm;
            w.column_mut(found).copy_from(&v);
            frame.push(v);
            found += 1;
        }
    }
    assert_eq!(found, n, "natural basis construction fell short");
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites(n: usize) -> Vec<f64> {
        (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect()
    }

    #[test]
    fn partition_of_unity() {
        let x = sites(20);
        let knots = clamped_knots(&x);
        for &p in &[0.031, 0.3, 0.55, 0.92] {
            let row = basis_row(&knots, 0, p);
            assert!((row.sum() - 1.0).abs() < 1e-12, "sum at {p}");
        }
        // right endpoint of the clamped interval
        let row = basis_row(&knots, 0, x[19]);
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greville_reproduces_identity() {
        let x = sites(15);
        let knots = clamped_knots(&x);
        let g = greville(&knots);
        for &p in &[x[0], 0.21, 0.68, x[14]] {
            let row = basis_row(&knots, 0, p);
            assert!((row.dot(&g) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_matches_refined_quadrature() {
        let x = sites(8);
        let knots = clamped_knots(&x);
        let g1 = second_derivative_gram(&knots, 1);
        let g10 = second_derivative_gram(&knots, 10);
        assert!((&g1 - &g10).abs().max() < 1e-10 * g10.abs().max().max(1.0));
    }

    #[test]
    fn natural_transform_kills_boundary_curvature() {
        let x = sites(12);
        let knots = clamped_knots(&x);
        let w = natural_transform(&knots, &x);
        assert_eq!(w.ncols(), 12);
        let c0 = basis_row(&knots, 2, x[0]);
        let c1 = basis_row(&knots, 2, x[11]);
        for col in w.column_iter() {
            assert!(c0.dot(&col.clone_owned()).abs() < 1e-8);
            assert!(c1.dot(&col.clone_owned()).abs() < 1e-8);
        }
    }
}
