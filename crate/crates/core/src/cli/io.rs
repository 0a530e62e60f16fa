//! CSV input and output.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::SelectionData;
use crate::nuts::PosteriorDraws;
use crate::sim::SimDataset;

/// Column layout of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub outcome: String,
    /// Selection indicator; inferred from outcome missingness when absent.
    pub selection: Option<String>,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub intercept: bool,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let t = cell.trim();
    if is_missing(t) {
        return Err(Error::Parse { row, column: column.into(), detail: "missing covariate value".into() });
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::Parse { row, column: column.into(), detail: format!("'{t}' is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, column: column.into(), detail: format!("'{t}' is not finite") });
    }
    Ok(v)
}

fn parse_indicator(cell: &str, row: usize, column: &str) -> Result<bool> {
    match cell.trim() {
        "1" | "1.0" | "true" | "TRUE" => Ok(true),
        "0" | "0.0" | "false" | "FALSE" => Ok(false),
        other => Err(Error::Parse { row, column: column.into(), detail: format!("'{other}' is not 0 or 1") }),
    }
}

/// Reads a selection dataset. Rows are numbered from 1 at the first data
/// line. An empty cell or `NA` in the outcome marks it missing.
pub fn read_selection_csv<R: Read>(input: R, spec: &ColumnSpec) -> Result<SelectionData> {
    if spec.x.is_empty() && !spec.intercept || spec.w.is_empty() && !spec.intercept {
        return Err(Error::Data("both equations need at least one column".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: HashMap<String, usize> =
        reader.headers()?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
    let index = |name: &str| {
        headers.get(name).copied().ok_or_else(|| Error::Parse {
            row: 0,
            column: name.into(),
            detail: "column not found in header".into(),
        })
    };
    let y_idx = index(&spec.outcome)?;
    let c_idx = spec.selection.as_deref().map(index).transpose()?;
    let x_idx: Vec<usize> = spec.x.iter().map(|c| index(c)).collect::<Result<_>>()?;
    let w_idx: Vec<usize> = spec.w.iter().map(|c| index(c)).collect::<Result<_>>()?;

    let (mut v1, mut c, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0usize;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let y_cell = cell(y_idx);
        let y = if is_missing(y_cell) {
            None
        } else {
            Some(parse_number(y_cell, row, &spec.outcome)?)
        };
        let selected = match (c_idx, spec.selection.as_deref()) {
            (Some(i), Some(name)) => parse_indicator(cell(i), row, name)?,
            _ => y.is_some(),
        };
        match (selected, y) {
            (true, None) => {
                return Err(Error::Parse {
                    row,
                    column: spec.outcome.clone(),
                    detail: "selected unit has a missing outcome".into(),
                })
            }
            (false, Some(_)) => dropped += 1,
            _ => {}
        }
        v1.push(if selected { y } else { None });
        c.push(selected);
        if spec.intercept {
            x.push(1.0);
        }
        for (&i, name) in x_idx.iter().zip(&spec.x) {
            x.push(parse_number(cell(i), row, name)?);
        }
        if spec.intercept {
            w.push(1.0);
        }
        for (&i, name) in w_idx.iter().zip(&spec.w) {
            w.push(parse_number(cell(i), row, name)?);
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} unselected units carry an outcome value; it was ignored");
    }
    let extra = usize::from(spec.intercept);
    SelectionData::new(v1, c, x, spec.x.len() + extra, w, spec.w.len() + extra)
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v}")
}

/// Writes a generated dataset as `y, c, x1.., w1..`, leaving out the
/// intercept columns.
pub fn write_dataset_csv<W: Write>(out: W, data: &SimDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let p = data.x.len() / data.n();
    let q = data.w.len() / data.n();
    let mut header = vec!["y".to_string(), "c".to_string()];
    header.extend((1..p).map(|j| format!("x{j}")));
    header.extend((1..q).map(|k| format!("w{k}")));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.v1[i].map_or_else(|| "NA".to_string(), fmt_f64), u8::from(data.c[i]).to_string()];
        rec.extend(data.x[i * p + 1..(i + 1) * p].iter().map(|&v| fmt_f64(v)));
        rec.extend(data.w[i * q + 1..(i + 1) * q].iter().map(|&v| fmt_f64(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per retained draw: chain, draw index, constrained parameters and
/// sampler statistics.
pub fn write_draws_csv<W: Write>(out: W, draws: &PosteriorDraws) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names.iter().cloned());
    header.extend(["accept_stat", "tree_depth", "divergent"].map(String::from));
    wtr.write_record(&header)?;
    for (k, chain) in draws.chains.iter().enumerate() {
        for (s, row) in chain.params.iter().enumerate() {
            let mut rec = vec![k.to_string(), s.to_string()];
            rec.extend(row.iter().map(|&v| fmt_f64(v)));
            rec.push(fmt_f64(chain.accept_stat[s]));
            rec.push(chain.tree_depth[s].to_string());
            rec.push(u8::from(chain.divergent[s]).to_string());
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Points per parameter in [`write_density_csv`].
pub const DENSITY_GRID_POINTS: usize = 128;

/// Gaussian kernel density estimate of `values` on an even grid, with
/// Silverman's bandwidth. Empty for fewer than two distinct values.
pub fn kde_grid(values: &[f64], points: usize) -> Vec<(f64, f64)> {
    let n = values.len();
    if n < 2 || points < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = sorted[(3 * n) / 4] - sorted[n / 4];
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Vec::new();
    }
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[n - 1] + 3.0 * h);
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|g| {
            let x = lo + (hi - lo) * g as f64 / (points - 1) as f64;
            let d = sorted.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm;
            (x, d)
        })
        .collect()
}

/// Plot-ready marginal posterior densities: `param, x, density`.
pub fn write_density_csv<W: Write>(out: W, draws: &PosteriorDraws) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["param", "x", "density"])?;
    for (j, name) in draws.names.iter().enumerate() {
        for (x, d) in kde_grid(&draws.param_merged(j), DENSITY_GRID_POINTS) {
            wtr.write_record([name.as_str(), &fmt_f64(x), &fmt_f64(d)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
