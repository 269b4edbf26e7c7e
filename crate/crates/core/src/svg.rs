//! Minimal static SVG emission for the two report figures.
//!
//! Pure string assembly from the report CSV contents; identical input bytes
//! produce identical output bytes.

use crate::error::{Error, Result};
use crate::experiments::{DivergenceRow, RelErrRow};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 45.0;

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi > lo {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    } else {
        0.5 * (out_lo + out_hi)
    }
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

struct Panel {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    offset: f64,
}

impl Panel {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.offset + scale(x, self.x_lo, self.x_hi, MARGIN, WIDTH - 10.0),
            scale(y, self.y_lo, self.y_hi, HEIGHT - MARGIN, 15.0),
        )
    }
}

/// Divergence curves for the first `max_replicates` replicates: left panel
/// against log10(lambda), right panel against log10(rho); the lambda-formula
/// series in red, the rho-formula series in blue.
pub fn figure1(rows: &[DivergenceRow], max_replicates: usize) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::MissingReport("divergence.csv has no rows".into()));
    }
    let reps: Vec<usize> = {
        let mut seen = Vec::new();
        for r in rows {
            if !seen.contains(&r.replicate) {
                seen.push(r.replicate);
            }
            if seen.len() == max_replicates {
                break;
            }
        }
        seen
    };
    let sel: Vec<&DivergenceRow> = rows
        .iter()
        .filter(|r| reps.contains(&r.replicate))
        .collect();
    let bounds = |f: &dyn Fn(&DivergenceRow) -> f64| {
        sel.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(f(r)), hi.max(f(r)))
        })
    };
    let (lx_lo, lx_hi) = bounds(&|r| r.lambda.log10());
    let (rx_lo, rx_hi) = bounds(&|r| r.rho.max(1e-300).log10());
    let (dy_lo, dy_hi) = {
        let (a, b) = bounds(&|r| r.div_lambda);
        let (c, d) = bounds(&|r| r.div_rho);
        (a.min(c), b.max(d))
    };
    let left = Panel {
        x_lo: lx_lo,
        x_hi: lx_hi,
        y_lo: dy_lo,
        y_hi: dy_hi,
        offset: 0.0,
    };
    let right = Panel {
        x_lo: rx_lo,
        x_hi: rx_hi,
        y_lo: dy_lo,
        y_hi: dy_hi,
        offset: WIDTH,
    };

    let mut body = String::new();
    for &rep in &reps {
        let rep_rows: Vec<&&DivergenceRow> =
            sel.iter().filter(|r| r.replicate == rep).collect();
        for (panel, xf) in [
            (&left, Box::new(|r: &DivergenceRow| r.lambda.log10()) as Box<dyn Fn(&DivergenceRow) -> f64>),
            (&right, Box::new(|r: &DivergenceRow| r.rho.max(1e-300).log10())),
        ] {
            let pts_l: Vec<(f64, f64)> = rep_rows
                .iter()
                .map(|r| panel.map(xf(r), r.div_lambda))
                .collect();
            let pts_r: Vec<(f64, f64)> = rep_rows
                .iter()
                .map(|r| panel.map(xf(r), r.div_rho))
                .collect();
            body.push_str(&polyline(&pts_l, "red"));
            body.push_str(&polyline(&pts_r, "blue"));
        }
    }
    Ok(wrap(2.0 * WIDTH, HEIGHT, &body))
}

/// Per-method relative-error box summaries.
pub fn figure2(rows: &[RelErrRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::MissingReport("relerr.csv has no rows".into()));
    }
    let methods = ["AIC_lambda", "AIC_rho", "GCV_lambda", "GCV_rho"];
    let mut body = String::new();
    let slot = (WIDTH - MARGIN - 10.0) / methods.len() as f64;
    for (k, method) in methods.iter().enumerate() {
        let mut vals: Vec<f64> = rows
            .iter()
            .filter(|r| &r.method == method)
            .map(|r| r.relative_error)
            .collect();
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let pos = p * (vals.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            vals[lo] + (vals[hi] - vals[lo]) * (pos - lo as f64)
        };
        let ymap = |v: f64| scale(v, 0.0, 100.0, HEIGHT - MARGIN, 15.0);
        let cx = MARGIN + slot * (k as f64 + 0.5);
        let half = slot * 0.25;
        // whiskers, box, median
        body.push_str(&format!(
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            ymap(vals[0]),
            ymap(vals[vals.len() - 1]),
        ));
        body.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n",
            cx - half,
            ymap(q(0.75)),
            2.0 * half,
            (ymap(q(0.25)) - ymap(q(0.75))).abs(),
        ));
        body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cx - half,
            ymap(q(0.5)),
            cx + half,
            ymap(q(0.5)),
        ));
        body.push_str(&format!(
            "<text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{method}</text>\n",
            HEIGHT - MARGIN + 16.0,
        ));
    }
    Ok(wrap(WIDTH, HEIGHT, &body))
}

fn wrap(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n{body}</svg>\n"
    )
}
