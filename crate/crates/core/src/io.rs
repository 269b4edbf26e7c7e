//! Parsers for the CLI input formats.
//!
//! Everything here takes untrusted bytes; each entry point has a fuzz target
//! under `fuzz/`. All numeric parsing rejects NaN and infinities, and parse
//! failures carry the 1-based line number of the offending record.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::experiments::GuConfig;

fn parse_field(raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::ParseError {
            line,
            msg: format!("not a number: {raw:?}"),
        })?;
    if !v.is_finite() {
        return Err(Error::ParseError {
            line,
            msg: format!("non-finite value: {raw:?}"),
        });
    }
    Ok(v)
}

fn records(data: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    data.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i, l.split(',').collect()))
}

/// Scalar spline input: header `x,y`, one observation per row.
pub fn parse_xy_csv(data: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut it = records(data);
    match it.next() {
        Some((_, h)) if h == ["x", "y"] => {}
        Some((line, _)) => {
            return Err(Error::ParseError {
                line,
                msg: "expected header `x,y`".into(),
            })
        }
        None => {
            return Err(Error::ParseError {
                line: 1,
                msg: "empty input".into(),
            })
        }
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, fields) in it {
        if fields.len() != 2 {
            return Err(Error::ParseError {
                line,
                msg: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        x.push(parse_field(fields[0], line)?);
        y.push(parse_field(fields[1], line)?);
    }
    Ok((x, y))
}

/// Ridge input: header `x1,...,xp,y`.
pub fn parse_ridge_csv(data: &str) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut it = records(data);
    let (hline, header) = it.next().ok_or(Error::ParseError {
        line: 1,
        msg: "empty input".into(),
    })?;
    let p = header.len().saturating_sub(1);
    if p == 0 || header.last() != Some(&"y") {
        return Err(Error::ParseError {
            line: hline,
            msg: "expected header `x1,...,xp,y`".into(),
        });
    }
    for (j, h) in header[..p].iter().enumerate() {
        if *h != format!("x{}", j + 1) {
            return Err(Error::ParseError {
                line: hline,
                msg: format!("expected column `x{}`, got {h:?}", j + 1),
            });
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for (line, fields) in it {
        if fields.len() != p + 1 {
            return Err(Error::ParseError {
                line,
                msg: format!("expected {} fields, got {}", p + 1, fields.len()),
            });
        }
        let mut row = Vec::with_capacity(p);
        for f in &fields[..p] {
            row.push(parse_field(f, line)?);
        }
        y.push(parse_field(fields[p], line)?);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::ParseError {
            line: hline,
            msg: "no data rows".into(),
        });
    }
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok((x, y))
}

/// Functional curves: the header row carries the quadrature grid itself, each
/// following row is one sampled curve.
pub fn parse_curves_csv(data: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut it = records(data);
    let (hline, header) = it.next().ok_or(Error::ParseError {
        line: 1,
        msg: "empty input".into(),
    })?;
    let grid = header
        .iter()
        .map(|f| parse_field(f, hline))
        .collect::<Result<Vec<f64>>>()?;
    let m = grid.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, fields) in it {
        if fields.len() != m {
            return Err(Error::ParseError {
                line,
                msg: format!("expected {m} fields, got {}", fields.len()),
            });
        }
        rows.push(
            fields
                .iter()
                .map(|f| parse_field(f, line))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::ParseError {
            line: hline,
            msg: "no curve rows".into(),
        });
    }
    let curves = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    Ok((grid, curves))
}

/// Response vector: optional `y` header, one value per line.
pub fn parse_y_csv(data: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line, fields) in records(data) {
        if fields.len() != 1 {
            return Err(Error::ParseError {
                line,
                msg: "expected one value per line".into(),
            });
        }
        if line == 1 && fields[0].trim() == "y" {
            continue;
        }
        out.push(parse_field(fields[0], line)?);
    }
    if out.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            msg: "empty response".into(),
        });
    }
    Ok(out)
}

/// Grid specification for the `--grid` flag.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `log10nl:start:step:end` — grid in log10(n * lambda), as in the
    /// simulation study; needs n to materialize.
    Log10NLambda { start: f64, step: f64, end: f64 },
    /// `log10:start:step:end` — grid directly in log10(theta).
    Log10 { start: f64, step: f64, end: f64 },
    /// `list:v1,v2,...` — explicit strictly increasing values.
    List(Vec<f64>),
}

pub fn parse_grid_spec(spec: &str) -> Result<GridSpec> {
    let bad = |msg: &str| Error::ParseError {
        line: 1,
        msg: msg.to_string(),
    };
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("expected `kind:...`"))?;
    match kind {
        "log10nl" | "log10" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected `start:step:end`"));
            }
            let start = parse_field(parts[0], 1)?;
            let step = parse_field(parts[1], 1)?;
            let end = parse_field(parts[2], 1)?;
            if step <= 0.0 || start > end {
                return Err(bad("need step > 0 and start <= end"));
            }
            Ok(if kind == "log10nl" {
                GridSpec::Log10NLambda { start, step, end }
            } else {
                GridSpec::Log10 { start, step, end }
            })
        }
        "list" => {
            let vals = rest
                .split(',')
                .map(|v| parse_field(v, 1))
                .collect::<Result<Vec<f64>>>()?;
            if vals.is_empty() || vals.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("list must be non-empty and strictly increasing"));
            }
            Ok(GridSpec::List(vals))
        }
        other => Err(bad(&format!("unknown grid kind {other:?}"))),
    }
}

impl GridSpec {
    /// Materialize the theta grid; `n` is the sample size for `log10nl`.
    pub fn materialize(&self, n: usize) -> Vec<f64> {
        match self {
            GridSpec::Log10NLambda { start, step, end } => {
                let count = ((end - start) / step).round() as usize + 1;
                (0..count)
                    .map(|k| 10f64.powf(start + step * k as f64) / n as f64)
                    .collect()
            }
            GridSpec::Log10 { start, step, end } => {
                let count = ((end - start) / step).round() as usize + 1;
                (0..count).map(|k| 10f64.powf(start + step * k as f64)).collect()
            }
            GridSpec::List(v) => v.clone(),
        }
    }
}

/// Simulation configuration from JSON; unknown keys are rejected.
pub fn parse_config(data: &str) -> Result<GuConfig> {
    let cfg: GuConfig =
        serde_json::from_str(data).map_err(|e| Error::ConfigError(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
