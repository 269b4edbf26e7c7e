//! Tuning-parameter selection: AIC, GCV, loss curves and relative error.

use nalgebra::DVector;
use serde::Serialize;

use crate::engine::{self, DrSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Indexing {
    Lambda,
    Rho,
}

/// Which AIC to report. `Paper` is the unnormalized `log RSS + 2 div` form;
/// `Classical` is `n log(RSS/n) + 2 div`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AicForm {
    Paper,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Gcv,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionTable {
    pub indexing: Indexing,
    pub grid: Vec<f64>,
    pub rss: Vec<f64>,
    pub div: Vec<f64>,
    pub aic: Vec<f64>,
    pub gcv: Vec<f64>,
    pub chosen_aic: usize,
    pub chosen_gcv: usize,
}

#[derive(Debug, Clone)]
pub struct LossCurve {
    pub rho_grid: Vec<f64>,
    pub loss: Vec<f64>,
    pub min_loss: f64,
    pub max_loss: f64,
}

pub fn aic(rss: f64, div: f64) -> Result<f64> {
    aic_with_form(rss, div, 0, AicForm::Paper)
}

pub fn aic_with_form(rss: f64, div: f64, n: usize, form: AicForm) -> Result<f64> {
    if !(rss > 0.0) {
        return Err(Error::NonPositiveRss(rss));
    }
    Ok(match form {
        AicForm::Paper => rss.ln() + 2.0 * div,
        AicForm::Classical => n as f64 * (rss / n as f64).ln() + 2.0 * div,
    })
}

pub fn gcv(rss: f64, div: f64, n: usize) -> Result<f64> {
    if div >= n as f64 {
        return Err(Error::DivergenceExceedsN { div, n });
    }
    let denom = n as f64 - div;
    Ok(rss / (denom * denom))
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Evaluate RSS, divergence and both criteria over a strictly increasing grid
/// of tuning values in the requested indexing.
pub fn evaluate_grid(
    sys: &DrSystem,
    y: &DVector<f64>,
    grid: &[f64],
    indexing: Indexing,
    aic_form: AicForm,
) -> Result<CriterionTable> {
    if grid.is_empty() {
        return Err(Error::GridOrderError);
    }
    for (i, &g) in grid.iter().enumerate() {
        let lower_ok = match indexing {
            Indexing::Lambda => g >= 0.0,
            Indexing::Rho => g > 0.0,
        };
        if !lower_ok || !g.is_finite() || (i > 0 && g <= grid[i - 1]) {
            return Err(Error::GridOrderError);
        }
    }
    let n = y.len();
    let mut rss = Vec::with_capacity(grid.len());
    let mut div = Vec::with_capacity(grid.len());
    for &theta in grid {
        match indexing {
            Indexing::Lambda => {
                let fit = engine::fit_penalty(sys, y, theta)?;
                rss.push(fit.rss);
                div.push(fit.div_lambda);
            }
            Indexing::Rho => {
                let fit = engine::fit_constraint(sys, y, theta)?;
                rss.push(fit.rss);
                div.push(fit.div_rho);
            }
        }
    }
    let aic_col = rss
        .iter()
        .zip(&div)
        .map(|(&r, &d)| aic_with_form(r, d, n, aic_form))
        .collect::<Result<Vec<_>>>()?;
    let gcv_col = rss
        .iter()
        .zip(&div)
        .map(|(&r, &d)| gcv(r, d, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionTable {
        indexing,
        grid: grid.to_vec(),
        chosen_aic: argmin(&aic_col),
        chosen_gcv: argmin(&gcv_col),
        rss,
        div,
        aic: aic_col,
        gcv: gcv_col,
    })
}

impl CriterionTable {
    pub fn chosen(&self, criterion: Criterion) -> usize {
        match criterion {
            Criterion::Aic => self.chosen_aic,
            Criterion::Gcv => self.chosen_gcv,
        }
    }

    /// CSV body with header `theta,rss,div,aic,gcv`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,rss,div,aic,gcv\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(self.grid[i]),
                fmt(self.rss[i]),
                fmt(self.div[i]),
                fmt(self.aic[i]),
                fmt(self.gcv[i]),
            ));
        }
        out
    }
}

/// Serialize with 17 significant digits so values round-trip exactly.
pub fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Per-grid empirical loss against a known truth.
pub fn loss_curve(
    rho_grid: &[f64],
    fitted: &[DVector<f64>],
    truth: &DVector<f64>,
) -> Result<LossCurve> {
    if rho_grid.len() != fitted.len() {
        return Err(Error::LengthMismatch(rho_grid.len(), fitted.len()));
    }
    let n = truth.len();
    let mut loss = Vec::with_capacity(fitted.len());
    for mu in fitted {
        if mu.len() != n {
            return Err(Error::LengthMismatch(mu.len(), n));
        }
        loss.push((mu - truth).norm_squared() / n as f64);
    }
    let min_loss = loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_loss = loss.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LossCurve {
        rho_grid: rho_grid.to_vec(),
        loss,
        min_loss,
        max_loss,
    })
}

/// Relative error on the 0–100 scale of the loss range.
pub fn relative_error(loss_at_chosen: f64, curve: &LossCurve) -> Result<f64> {
    if !(curve.max_loss > curve.min_loss) {
        return Err(Error::FlatLossCurve);
    }
    // form the ratio first: it lies in [0, 1] exactly, so the scaled value
    // cannot escape [0, 100] through intermediate rounding
    Ok(100.0 * ((loss_at_chosen - curve.min_loss) / (curve.max_loss - curve.min_loss)))
}
