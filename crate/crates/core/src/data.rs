//! Right-censored dataset ingestion and canonicalization.
//!
//! Every downstream computation assumes the canonical representation produced
//! here: rows sorted by non-decreasing observed time, with events placed
//! before censorings at tied times (a subject censored at `t` is still at
//! risk at `t`).

use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// A validated right-censored dataset in canonical (time-ascending) order.
///
/// Row `i` holds the observed time `T_i = min(Z_i, C_i)`, the event indicator
/// `Δ_i = 1{T_i = Z_i}`, and the covariate vector `X_i`.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Array2<f64>,
    /// Maps canonical index -> original row index.
    sort_order: Vec<usize>,
}

impl SurvivalDataset {
    /// Number of observations.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Covariate dimension d.
    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    /// Observed times in canonical order.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Event indicators in canonical order.
    pub fn events(&self) -> &[bool] {
        &self.events
    }

    /// n x d covariate matrix in canonical order.
    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.covariates.row(i)
    }

    /// Permutation mapping canonical index -> original row index.
    pub fn sort_order(&self) -> &[usize] {
        &self.sort_order
    }

    /// Canonical indices of uncensored observations.
    pub fn event_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.events[i]).collect()
    }

    /// Number of uncensored observations.
    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }
}

/// Per-column affine transform recorded by [`standardize_covariates`].
#[derive(Debug, Clone)]
pub struct CovariateStandardization {
    pub means: Vec<f64>,
    /// Strictly positive scale (sample standard deviation, or 1 for constant
    /// columns).
    pub scales: Vec<f64>,
    /// True for columns with zero sample variance, which were centered but
    /// left unscaled.
    pub constant_columns: Vec<bool>,
}

/// Validate and sort raw arrays into a canonical dataset.
///
/// Ties in time are broken with events (`Δ=1`) first; rows that tie on both
/// time and indicator keep their input order.
pub fn canonicalize(
    times: &[f64],
    events: &[bool],
    covariates: &Array2<f64>,
) -> Result<SurvivalDataset> {
    let n = times.len();
    if events.len() != n || covariates.nrows() != n {
        return Err(Error::Validation(format!(
            "length mismatch: {} times, {} events, {} covariate rows",
            n,
            events.len(),
            covariates.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::Validation("fewer than 2 rows".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::Validation(format!("non-finite time in row {i}")));
        }
        if t <= 0.0 {
            return Err(Error::Validation(format!("non-positive time in row {i}")));
        }
    }
    if covariates.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite covariate value".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: time ascending, then events before censorings.
    order.sort_by(|&a, &b| {
        times[a]
            .partial_cmp(&times[b])
            .expect("times are finite")
            .then_with(|| events[b].cmp(&events[a]))
    });

    let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let sorted_events: Vec<bool> = order.iter().map(|&i| events[i]).collect();
    let d = covariates.ncols();
    let mut sorted_cov = Array2::zeros((n, d));
    for (canon, &orig) in order.iter().enumerate() {
        sorted_cov.row_mut(canon).assign(&covariates.row(orig));
    }

    Ok(SurvivalDataset {
        times: sorted_times,
        events: sorted_events,
        covariates: sorted_cov,
        sort_order: order,
    })
}

/// Column mapping for [`load_csv`]. Covariate entries may be exact header
/// names or `*`-wildcards such as `x*`.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time_col: String,
    pub event_col: String,
    pub covariate_cols: Vec<String>,
}

fn wildcard_match(pattern: &str, name: &str) -> bool {
    // Only `*` is special; it matches any (possibly empty) substring.
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == name;
    }
    let mut rest = name;
    for (idx, part) in parts.iter().enumerate() {
        if idx == 0 {
            if !rest.starts_with(part) {
                return false;
            }
            rest = &rest[part.len()..];
        } else if idx == parts.len() - 1 {
            return part.is_empty() || rest.ends_with(part);
        } else if let Some(pos) = rest.find(part) {
            rest = &rest[pos + part.len()..];
        } else {
            return false;
        }
    }
    true
}

fn parse_event(raw: &str, row: usize) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        "true" | "TRUE" | "True" => Ok(true),
        "false" | "FALSE" | "False" => Ok(false),
        other => Err(Error::Parse(format!(
            "event value '{other}' outside {{0,1,true,false}} in row {row}"
        ))),
    }
}

/// Load a dataset from a headered, comma-delimited CSV file.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let header_names: Vec<String> = headers.iter().map(str::to_string).collect();

    let col_index = |name: &str| -> Result<usize> {
        header_names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("column '{name}' not found in header")))
    };
    let time_idx = col_index(&schema.time_col)?;
    let event_idx = col_index(&schema.event_col)?;

    let mut cov_indices: Vec<usize> = Vec::new();
    for pat in &schema.covariate_cols {
        if pat.contains('*') {
            let before = cov_indices.len();
            for (i, h) in header_names.iter().enumerate() {
                if wildcard_match(pat, h)
                    && i != time_idx
                    && i != event_idx
                    && !cov_indices.contains(&i)
                {
                    cov_indices.push(i);
                }
            }
            if cov_indices.len() == before {
                return Err(Error::Validation(format!(
                    "covariate pattern '{pat}' matched no columns"
                )));
            }
        } else {
            let i = col_index(pat)?;
            if !cov_indices.contains(&i) {
                cov_indices.push(i);
            }
        }
    }
    if cov_indices.is_empty() {
        return Err(Error::Validation("no covariate columns selected".into()));
    }

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut cov_rows: Vec<f64> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let get = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::Parse(format!("short record in row {row_no}")))
        };
        let t: f64 = get(time_idx)?.trim().parse().map_err(|_| {
            Error::Parse(format!(
                "non-numeric cell '{}' in time column, row {row_no}",
                record.get(time_idx).unwrap_or("")
            ))
        })?;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Validation(format!(
                "non-positive time in row {row_no}"
            )));
        }
        times.push(t);
        events.push(parse_event(get(event_idx)?, row_no)?);
        for &ci in &cov_indices {
            let v: f64 = get(ci)?.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "non-numeric cell '{}' in column '{}', row {row_no}",
                    record.get(ci).unwrap_or(""),
                    header_names[ci]
                ))
            })?;
            cov_rows.push(v);
        }
    }

    let n = times.len();
    if n < 2 {
        return Err(Error::Validation("fewer than 2 rows".into()));
    }
    let covariates = Array2::from_shape_vec((n, cov_indices.len()), cov_rows)
        .map_err(|e| Error::Validation(e.to_string()))?;
    canonicalize(&times, &events, &covariates)
}

/// Center each covariate column to mean zero and scale it to unit sample
/// variance (divisor n-1). Constant columns are centered only and flagged.
pub fn standardize_covariates(
    ds: &SurvivalDataset,
) -> Result<(SurvivalDataset, CovariateStandardization)> {
    let n = ds.len();
    let d = ds.dim();
    let mut means = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    let mut cov = ds.covariates.clone();

    for j in 0..d {
        let col = ds.covariates.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let is_const = var == 0.0;
        let scale = if is_const { 1.0 } else { var.sqrt() };
        for i in 0..n {
            cov[[i, j]] = (ds.covariates[[i, j]] - mean) / scale;
        }
        means.push(mean);
        scales.push(scale);
        constant.push(is_const);
    }

    let standardized = SurvivalDataset {
        times: ds.times.clone(),
        events: ds.events.clone(),
        covariates: cov,
        // Input is already canonical, so the permutation is unchanged.
        sort_order: ds.sort_order.clone(),
    };
    Ok((
        standardized,
        CovariateStandardization {
            means,
            scales,
            constant_columns: constant,
        },
    ))
}
