//! Built-in verification suites driven by the `validate` CLI subcommand.
//!
//! Each check compares an analytic formula against one of the independent
//! oracles on a fixed fixture and emits a machine-readable record. Hard
//! checks gate the exit status; soft checks (the non-spherical geometry
//! adjudication and the divergence-gap scan) are reported as findings.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{self, system_from_spectrum};
use crate::error::Result;
use crate::oracles;
use crate::problem::{build_penalized_spline, build_ridge, build_smoothing_spline, RegressionProblem};

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Hard checks gate the exit status; soft ones are findings.
    pub hard: bool,
}

impl CheckRecord {
    fn hard(name: impl Into<String>, expected: f64, observed: f64, tol: f64) -> Self {
        let pass = relative_gap(expected, observed) <= tol;
        Self {
            name: name.into(),
            expected,
            observed,
            tolerance: tol,
            pass,
            hard: true,
        }
    }

    fn soft(name: impl Into<String>, expected: f64, observed: f64, tol: f64) -> Self {
        let mut r = Self::hard(name, expected, observed, tol);
        r.hard = false;
        r
    }
}

fn relative_gap(expected: f64, observed: f64) -> f64 {
    (expected - observed).abs() / expected.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fd,
    Mc,
    Trace,
    Geometry,
    Duality,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fd" => Suite::Fd,
            "mc" => Suite::Mc,
            "trace" => Suite::Trace,
            "geometry" => Suite::Geometry,
            "duality" => Suite::Duality,
            "all" => Suite::All,
            _ => return None,
        })
    }
}

pub fn random_problem(seed: u64) -> (RegressionProblem, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = seed % 4;
    let n = 12 + (seed as usize % 12);
    let problem = match kind {
        0 => {
            // keep d = n small: the hat-trace oracle inverts a d x d system.
            // Jittered-grid sites guarantee a minimum spacing so the
            // roughness penalty stays well scaled.
            let n = 8 + (seed as usize % 5);
            let x: Vec<f64> = (0..n)
                .map(|i| (i as f64 + 0.1 + 0.8 * rng.gen::<f64>()) / n as f64)
                .collect();
            let y: Vec<f64> = x.iter().map(|&t| t.sin() + 0.1 * rng.gen::<f64>()).collect();
            build_smoothing_spline(&x, &y).unwrap()
        }
        1 => {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let y: Vec<f64> = x.iter().map(|&t| (4.0 * t).cos() + rng.gen::<f64>()).collect();
            let knots = [0.3, 0.5, 0.7];
            build_penalized_spline(&x, &y, 2, &knots).unwrap()
        }
        2 => {
            let p = 2 + (seed as usize % 3);
            let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() - 0.5);
            let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            build_ridge(&x, &y).unwrap()
        }
        _ => {
            let m = 31;
            let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
            let nc = 8;
            let curves = DMatrix::from_fn(nc, m, |i, j| {
                let t = grid[j];
                ((i + 1) as f64 * t * 3.0).sin() + rng.gen::<f64>() * 0.05
            });
            let y: Vec<f64> = (0..nc).map(|_| rng.gen::<f64>()).collect();
            crate::problem::build_functional(&curves, &grid, &y, crate::problem::KernelId::SobolevW22)
                .unwrap()
                .0
        }
    };
    let y = problem.y.clone();
    (problem, y)
}

pub fn run_trace_suite() -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for seed in 0..12u64 {
        let (problem, _) = random_problem(seed);
        let sys = engine::decompose(&problem)?;
        for &lambda in &[0.0, 0.3, 2.0] {
            let analytic = engine::div_lambda(&sys, lambda)?;
            let direct = oracles::trace_hat_direct(&problem, lambda)?;
            out.push(CheckRecord::hard(
                format!("trace/seed{seed}/lambda{lambda}"),
                direct,
                analytic,
                1e-8,
            ));
        }
    }
    Ok(out)
}

pub fn run_fd_suite() -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    // spherical fixture: analytic div(rho) = 2/3
    let sys = system_from_spectrum(&[1.0, 1.0, 1.0]);
    let y = DVector::from_column_slice(&[2.0, 1.0, 2.0]);
    let fit = engine::fit_constraint(&sys, &y, 1.0)?;
    let refit = |v: &DVector<f64>| engine::fit_constraint(&sys, v, 1.0).map(|f| f.mu);
    let fd = oracles::fd_divergence(refit, &y, oracles::default_fd_step(&y))?;
    out.push(CheckRecord::hard("fd/spherical-analytic", 2.0 / 3.0, fd, 1e-4));
    out.push(CheckRecord::hard(
        "fd/spherical-formula",
        fit.div_rho,
        fd,
        1e-4,
    ));

    // penalty-form fits on mixed problems
    for seed in [2u64, 5, 7, 10] {
        let (problem, y) = random_problem(seed);
        let sys = engine::decompose(&problem)?;
        let lambda = 0.5;
        let analytic = engine::div_lambda(&sys, lambda)?;
        let refit = |v: &DVector<f64>| engine::fit_penalty(&sys, v, lambda).map(|f| f.mu);
        let fd = oracles::fd_divergence(refit, &y, oracles::default_fd_step(&y))?;
        out.push(CheckRecord::hard(
            format!("fd/penalty-seed{seed}"),
            analytic,
            fd,
            1e-6,
        ));
    }

    // non-spherical constraint fits: formula vs oracle, reported as findings
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let r = 3 + (seed as usize % 4);
        let c: Vec<f64> = (0..r)
            .map(|k| 2.5 * (0.6f64).powi(k as i32) * (1.0 + 0.1 * rng.gen::<f64>()))
            .collect();
        let sys = system_from_spectrum(&c);
        let y = DVector::from_fn(r, |_, _| rng.gen::<f64>() + 0.3);
        let rho_full: f64 = (0..r).map(|j| sys.c[j] * y[j] * y[j]).sum();
        let rho = rho_full * (0.1 + 0.5 * rng.gen::<f64>());
        let fit = engine::fit_constraint(&sys, &y, rho)?;
        let refit = |v: &DVector<f64>| engine::fit_constraint(&sys, v, rho).map(|f| f.mu);
        let fd = oracles::fd_divergence(refit, &y, oracles::default_fd_step(&y))?;
        out.push(CheckRecord::soft(
            format!("fd/constraint-nonspherical-seed{seed}"),
            fit.div_rho,
            fd,
            1e-3,
        ));
    }
    Ok(out)
}

pub fn run_duality_suite() -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for seed in 0..8u64 {
        let (problem, y) = random_problem(seed);
        let sys = engine::decompose(&problem)?;
        for k in 0..5 {
            let lambda = 10f64.powf(-2.0 + k as f64);
            let pf = engine::fit_penalty(&sys, &y, lambda)?;
            if pf.rho_induced <= 0.0 {
                continue;
            }
            let cf = engine::fit_constraint(&sys, &y, pf.rho_induced)?;
            out.push(CheckRecord::hard(
                format!("duality/seed{seed}/lambda{lambda}"),
                lambda,
                cf.lambda_star,
                1e-6,
            ));
            out.push(CheckRecord::hard(
                format!("duality/seed{seed}/lambda{lambda}/mu"),
                0.0,
                (&cf.mu - &pf.mu).abs().max(),
                1e-8,
            ));
        }
    }
    Ok(out)
}

pub fn run_geometry_suite() -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    // spherical: pencil eigenvalues equal the closed form exactly
    let sys = system_from_spectrum(&[1.0, 1.0, 1.0, 1.0]);
    let y = DVector::from_column_slice(&[1.5, -1.0, 0.8, 1.2]);
    let fit = engine::fit_constraint(&sys, &y, 0.5)?;
    let pencil = oracles::geometric_phi(&sys, &fit)?;
    let mut closed: Vec<f64> = fit.phi.iter().cloned().collect();
    closed.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for j in 0..pencil.len() {
        out.push(CheckRecord::hard(
            format!("geometry/spherical/phi{j}"),
            closed[j],
            pencil[j],
            1e-6,
        ));
    }

    // non-spherical: sorted multiset comparison, reported as findings
    let mut emitted = 0;
    let mut seed = 0u64;
    while emitted < 30 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let r = 2 + (seed as usize % 5);
        let c: Vec<f64> = (0..r)
            .map(|k| 3.0 * (0.7f64).powi(k as i32) * (1.0 + 0.2 * rng.gen::<f64>()))
            .collect();
        let sys = system_from_spectrum(&c);
        let y = DVector::from_fn(r, |_, _| 0.5 + rng.gen::<f64>());
        let rho_full: f64 = (0..r).map(|j| sys.c[j] * y[j] * y[j]).sum();
        let fit = engine::fit_constraint(&sys, &y, rho_full * 0.3)?;
        let pencil = match oracles::geometric_phi(&sys, &fit) {
            Ok(p) => p,
            Err(_) => continue, // chart singularity; excluded by construction
        };
        let mut closed: Vec<f64> = fit.phi.iter().cloned().collect();
        closed.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let max_rel = (0..pencil.len())
            .map(|j| relative_gap(closed[j], pencil[j]))
            .fold(0.0, f64::max);
        let tol = 1e-6;
        let rec = if r == 2 {
            // scalar pencil: the closed form must agree exactly
            CheckRecord::hard(format!("geometry/nonspherical-seed{seed}-r{r}"), 0.0, max_rel, tol)
        } else {
            CheckRecord::soft(format!("geometry/nonspherical-seed{seed}-r{r}"), 0.0, max_rel, tol)
        };
        out.push(rec);
        emitted += 1;
    }
    Ok(out)
}

pub fn run_mc_suite() -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    // fixed-lambda smoothing spline
    let n = 50;
    let x: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    let truth = DVector::from_iterator(n, x.iter().map(|&t| crate::experiments::f_true(t)));
    let problem = build_smoothing_spline(&x, &vec![0.0; n])?;
    let sys = engine::decompose(&problem)?;
    let lambda = 1e-3;
    let analytic = engine::div_lambda(&sys, lambda)?;
    let gen = |m: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        rng.set_stream(m as u64);
        DVector::from_fn(n, |i, _| {
            let eps: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            truth[i] + eps
        })
    };
    let fitter = |y: &DVector<f64>| engine::fit_penalty(&sys, y, lambda).map(|f| f.mu);
    let est = oracles::mc_degrees_of_freedom(&truth, 1.0, gen, fitter, 2000)?;
    out.push(CheckRecord::hard(
        "mc/spline-fixed-lambda",
        analytic,
        est.estimate,
        3.0 * est.std_error / analytic.abs().max(1.0),
    ));

    // fixed-rho ridge: DF(rho) = E{div(rho)}
    let nr = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let xr = DMatrix::from_fn(nr, 3, |_, _| rng.gen::<f64>() - 0.5);
    let beta = DVector::from_column_slice(&[0.5, 1.0, -0.7, 0.3]);
    let rp = build_ridge(&xr, &vec![0.0; nr])?;
    let mu_r = &rp.design * &beta;
    let sys_r = engine::decompose(&rp)?;
    let rho = 0.4;
    let gen_r = |m: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(501);
        rng.set_stream(m as u64);
        DVector::from_fn(nr, |i, _| {
            let eps: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            mu_r[i] + eps
        })
    };
    let fitter_r = |y: &DVector<f64>| engine::fit_constraint(&sys_r, y, rho).map(|f| f.mu);
    let est_r = oracles::mc_degrees_of_freedom(&mu_r, 1.0, gen_r, fitter_r, 2000)?;
    // mean div(rho) across the same replicate stream
    let mut mean_div = 0.0;
    for m in 0..2000 {
        let y = gen_r(m);
        let fit = engine::fit_constraint(&sys_r, &y, rho)?;
        mean_div += if fit.active { fit.div_rho } else { sys_r.d as f64 };
    }
    mean_div /= 2000.0;
    out.push(CheckRecord::hard(
        "mc/ridge-fixed-rho",
        mean_div,
        est_r.estimate,
        3.0 * est_r.std_error / mean_div.abs().max(1.0),
    ));
    Ok(out)
}

pub fn run_suite(suite: Suite) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    match suite {
        Suite::Fd => out.extend(run_fd_suite()?),
        Suite::Mc => out.extend(run_mc_suite()?),
        Suite::Trace => out.extend(run_trace_suite()?),
        Suite::Geometry => out.extend(run_geometry_suite()?),
        Suite::Duality => out.extend(run_duality_suite()?),
        Suite::All => {
            out.extend(run_trace_suite()?);
            out.extend(run_duality_suite()?);
            out.extend(run_fd_suite()?);
            out.extend(run_geometry_suite()?);
            out.extend(run_mc_suite()?);
        }
    }
    Ok(out)
}

pub fn all_hard_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass || !r.hard)
}
