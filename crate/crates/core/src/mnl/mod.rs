//! Multinomial logit: utilities, probabilities, log-likelihood, gradients and
//! maximum-likelihood estimation.

pub mod bfgs;

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{map_blocks, pairwise_sum, pairwise_sum_vectors};
use crate::space::{CandidateCatalog, DesignTensor};

pub use bfgs::BfgsOptions;

/// Coefficients for every design column, flattened alternative by alternative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnlCoefficients {
    pub values: Vec<f64>,
    /// Column offset of each alternative; the last entry is the total.
    pub offsets: Vec<usize>,
}

impl MnlCoefficients {
    pub fn zeros(offsets: &[usize]) -> Self {
        MnlCoefficients {
            values: vec![0.0; *offsets.last().unwrap_or(&0)],
            offsets: offsets.to_vec(),
        }
    }

    pub fn for_design(design: &DesignTensor) -> Self {
        Self::zeros(design.offsets())
    }

    pub fn from_values(offsets: &[usize], values: Vec<f64>) -> Result<Self> {
        if values.len() != *offsets.last().unwrap_or(&0) {
            return Err(Error::Argument(format!(
                "{} coefficients for {} columns",
                values.len(),
                offsets.last().unwrap_or(&0)
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("coefficients must be finite".into()));
        }
        Ok(MnlCoefficients {
            values,
            offsets: offsets.to_vec(),
        })
    }

    pub fn alternative(&self, alt: usize) -> &[f64] {
        &self.values[self.offsets[alt]..self.offsets[alt + 1]]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_shapes(beta: &[f64], design: &DesignTensor, choices: Option<&[usize]>, rows: &[usize]) -> Result<()> {
    if beta.len() != design.total_columns() {
        return Err(Error::Argument(format!(
            "{} coefficients for a design with {} columns",
            beta.len(),
            design.total_columns()
        )));
    }
    if let Some(choices) = choices {
        if choices.len() != design.n_rows() {
            return Err(Error::Argument(format!(
                "{} choices for a design with {} rows",
                choices.len(),
                design.n_rows()
            )));
        }
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= design.n_rows()) {
        return Err(Error::Argument(format!("row {bad} out of range")));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Utilities of all alternatives for one row; unavailable ones are `-inf`.
fn row_utilities(beta: &[f64], design: &DesignTensor, row: usize, out: &mut [f64]) {
    let offsets = design.offsets();
    for (alt, v) in out.iter_mut().enumerate() {
        *v = if design.is_available(row, alt) {
            dot(&beta[offsets[alt]..offsets[alt + 1]], design.row(row, alt))
        } else {
            f64::NEG_INFINITY
        };
    }
}

/// `log Σ exp(v)` over the finite entries, shifted by the maximum.
fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `V[n, i]` for the given rows, row-major; unavailable alternatives hold `-inf`.
pub fn utilities(beta: &MnlCoefficients, design: &DesignTensor, rows: &[usize]) -> Result<Vec<f64>> {
    check_shapes(&beta.values, design, None, rows)?;
    let j = design.n_alternatives();
    let mut out = vec![0.0; rows.len() * j];
    for (k, &r) in rows.iter().enumerate() {
        row_utilities(&beta.values, design, r, &mut out[k * j..(k + 1) * j]);
    }
    Ok(out)
}

/// Softmax of each row of `v` over the available alternatives.
pub fn probabilities(v: &[f64], availability: &[bool], n_alternatives: usize) -> Result<Vec<f64>> {
    if v.len() != availability.len() || n_alternatives == 0 || v.len() % n_alternatives != 0 {
        return Err(Error::Argument("utilities and availability disagree in shape".into()));
    }
    let mut out = vec![0.0; v.len()];
    for (n, (vr, (ar, pr))) in v
        .chunks(n_alternatives)
        .zip(availability.chunks(n_alternatives).zip(out.chunks_mut(n_alternatives)))
        .enumerate()
    {
        let max = vr
            .iter()
            .zip(ar)
            .filter(|(_, &a)| a)
            .map(|(&x, _)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        if !ar.iter().any(|&a| a) {
            return Err(Error::Data(format!("row {n} has an empty availability set")));
        }
        let mut total = 0.0;
        for ((p, &x), &a) in pr.iter_mut().zip(vr).zip(ar) {
            if a {
                *p = (x - max).exp();
                total += *p;
            }
        }
        for p in pr.iter_mut() {
            *p /= total;
        }
    }
    Ok(out)
}

/// Choice probabilities for the given rows.
pub fn predict(beta: &MnlCoefficients, design: &DesignTensor, rows: &[usize]) -> Result<Vec<f64>> {
    let v = utilities(beta, design, rows)?;
    let j = design.n_alternatives();
    let avail: Vec<bool> = rows
        .iter()
        .flat_map(|&r| (0..j).map(move |i| (r, i)))
        .map(|(r, i)| design.is_available(r, i))
        .collect();
    probabilities(&v, &avail, j)
}

/// Log-likelihood and (optionally) its gradient over one block of rows.
fn block_terms(
    beta: &[f64],
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
    with_gradient: bool,
) -> Result<(f64, Vec<f64>)> {
    let j = design.n_alternatives();
    let offsets = design.offsets();
    let mut v = vec![0.0; j];
    let mut terms = Vec::with_capacity(rows.len());
    let mut grad = if with_gradient { vec![0.0; beta.len()] } else { Vec::new() };
    for &r in rows {
        let chosen = choices[r];
        if chosen >= j || !design.is_available(r, chosen) {
            return Err(Error::Data(format!("row {r}: chosen alternative {chosen} is not available")));
        }
        row_utilities(beta, design, r, &mut v);
        let lse = log_sum_exp(&v);
        terms.push(v[chosen] - lse);
        if with_gradient {
            for alt in 0..j {
                if !design.is_available(r, alt) {
                    continue;
                }
                let p = (v[alt] - lse).exp();
                let w = f64::from(u8::from(alt == chosen)) - p;
                if w == 0.0 {
                    continue;
                }
                let g = &mut grad[offsets[alt]..offsets[alt + 1]];
                for (gk, &x) in g.iter_mut().zip(design.row(r, alt)) {
                    *gk += w * x;
                }
            }
        }
    }
    Ok((pairwise_sum(&terms), grad))
}

fn reduce_terms(
    beta: &[f64],
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
    with_gradient: bool,
) -> Result<(f64, Vec<f64>)> {
    let parts = map_blocks(rows, |block| block_terms(beta, design, choices, block, with_gradient))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (lls, grads): (Vec<f64>, Vec<Vec<f64>>) = parts.into_iter().unzip();
    let grad = if with_gradient {
        pairwise_sum_vectors(grads, beta.len())
    } else {
        Vec::new()
    };
    Ok((pairwise_sum(&lls), grad))
}

/// `Σ_n log P_n(y_n)` over `rows`, evaluated by shifted log-sum-exp.
pub fn log_likelihood(beta: &MnlCoefficients, design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<f64> {
    check_shapes(&beta.values, design, Some(choices), rows)?;
    Ok(reduce_terms(&beta.values, design, choices, rows, false)?.0)
}

/// `∂/∂β Σ_n log P_n(y_n)`: `Σ_n v[n,i,col]·(y_in − P_n(i))`.
pub fn log_likelihood_grad(
    beta: &MnlCoefficients,
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
) -> Result<Vec<f64>> {
    Ok(loglik_and_grad(&beta.values, design, choices, rows)?.1)
}

/// Log-likelihood and gradient in one pass over the rows.
pub fn loglik_and_grad(beta: &[f64], design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_shapes(beta, design, Some(choices), rows)?;
    reduce_terms(beta, design, choices, rows, true)
}

/// Observed information `−∇²loglik` (equal to the Fisher information for MNL).
pub fn information_matrix(beta: &[f64], design: &DesignTensor, rows: &[usize]) -> Result<DMatrix<f64>> {
    check_shapes(beta, design, None, rows)?;
    let d = beta.len();
    let j = design.n_alternatives();
    let offsets = design.offsets();
    let parts = map_blocks(rows, |block| {
        let mut info = DMatrix::<f64>::zeros(d, d);
        let mut v = vec![0.0; j];
        let mut mean = vec![0.0; d];
        for &r in block {
            row_utilities(beta, design, r, &mut v);
            let lse = log_sum_exp(&v);
            mean.iter_mut().for_each(|m| *m = 0.0);
            for alt in 0..j {
                if !design.is_available(r, alt) {
                    continue;
                }
                let p = (v[alt] - lse).exp();
                let x = design.row(r, alt);
                let o = offsets[alt];
                for (a, &xa) in x.iter().enumerate() {
                    mean[o + a] += p * xa;
                    if xa == 0.0 {
                        continue;
                    }
                    for (b, &xb) in x.iter().enumerate() {
                        info[(o + a, o + b)] += p * xa * xb;
                    }
                }
            }
            let nz: Vec<usize> = (0..d).filter(|&k| mean[k] != 0.0).collect();
            for &a in &nz {
                for &b in &nz {
                    info[(a, b)] -= mean[a] * mean[b];
                }
            }
        }
        info
    });
    Ok(parts.into_iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m))
}

/// Inverse-information standard errors; `None` where the information is singular.
pub fn standard_errors(beta: &[f64], design: &DesignTensor, rows: &[usize]) -> Result<Vec<Option<f64>>> {
    let info = information_matrix(beta, design, rows)?;
    let d = beta.len();
    Ok(match info.clone().cholesky() {
        Some(chol) => {
            let inv = chol.inverse();
            (0..d).map(|k| Some(inv[(k, k)].sqrt())).collect()
        }
        None => {
            let eig = SymmetricEigen::new(info);
            let cutoff = 1e-10 * eig.eigenvalues.amax();
            let inv_vals = eig.eigenvalues.map(|e| if e > cutoff { 1.0 / e } else { 0.0 });
            let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
            (0..d)
                .map(|k| (inv[(k, k)] > 0.0).then(|| inv[(k, k)].sqrt()))
                .collect()
        }
    })
}

/// Columns involved in near-linear dependencies within an alternative,
/// judged from the eigenvectors of the column correlation matrix.
pub fn collinear_columns(design: &DesignTensor, rows: &[usize]) -> Vec<usize> {
    let mut flagged = Vec::new();
    for alt in 0..design.n_alternatives() {
        let w = design.width(alt);
        if w == 0 {
            continue;
        }
        let mut gram = DMatrix::<f64>::zeros(w, w);
        for &r in rows {
            if !design.is_available(r, alt) {
                continue;
            }
            let x = design.row(r, alt);
            for a in 0..w {
                if x[a] == 0.0 {
                    continue;
                }
                for b in 0..w {
                    gram[(a, b)] += x[a] * x[b];
                }
            }
        }
        let scale: Vec<f64> = (0..w).map(|k| gram[(k, k)].sqrt()).collect();
        let mut dead = vec![false; w];
        for k in 0..w {
            if scale[k] == 0.0 {
                dead[k] = true;
            }
        }
        let live: Vec<usize> = (0..w).filter(|&k| !dead[k]).collect();
        let m = live.len();
        let corr = DMatrix::from_fn(m, m, |a, b| gram[(live[a], live[b])] / (scale[live[a]] * scale[live[b]]));
        let eig = SymmetricEigen::new(corr);
        let max = eig.eigenvalues.amax();
        for (e, &val) in eig.eigenvalues.iter().enumerate() {
            if val < 1e-10 * max {
                let top = eig.eigenvectors.column(e).amax();
                for a in 0..m {
                    if eig.eigenvectors[(a, e)].abs() > 0.01 * top {
                        dead[live[a]] = true;
                    }
                }
            }
        }
        flagged.extend((0..w).filter(|&k| dead[k]).map(|k| design.offsets()[alt] + k));
    }
    flagged
}

/// Root mean square of each column over the available rows (1 for empty columns).
fn column_rms(design: &DesignTensor, rows: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(design.total_columns());
    for alt in 0..design.n_alternatives() {
        let w = design.width(alt);
        let mut sq = vec![0.0; w];
        let mut n = 0usize;
        for &r in rows {
            if design.is_available(r, alt) {
                n += 1;
                for (s, x) in sq.iter_mut().zip(design.row(r, alt)) {
                    *s += x * x;
                }
            }
        }
        out.extend(sq.into_iter().map(|s| {
            let rms = (s / n.max(1) as f64).sqrt();
            if rms > 0.0 { rms } else { 1.0 }
        }));
    }
    out
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MleOptions {
    #[serde(default)]
    pub bfgs: BfgsSettings,
    /// Compute inverse-information standard errors.
    #[serde(default)]
    pub standard_errors: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BfgsSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub relative_tolerance: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        let o = BfgsOptions::default();
        BfgsSettings {
            max_iterations: o.max_iterations,
            gradient_tolerance: o.gradient_tolerance,
            relative_tolerance: o.relative_tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MleFit {
    /// Coefficients over all design columns; columns outside the spec are 0.
    pub coefficients: MnlCoefficients,
    pub loglik: f64,
    pub iterations: usize,
    /// Log-likelihood after each accepted step.
    pub trace: Vec<f64>,
    pub gradient_max_norm: f64,
    /// Global indices of columns flagged as collinear.
    pub collinear: Vec<usize>,
    pub standard_errors: Option<Vec<Option<f64>>>,
    /// Global indices of the estimated columns.
    pub columns: Vec<usize>,
}

/// Maximum-likelihood fit over `rows`, restricted to the columns in `spec`
/// (all columns when `None`), starting from β = 0.
pub fn fit_mle(
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
    spec: Option<&[bool]>,
    options: &MleOptions,
) -> Result<MleFit> {
    check_shapes(&vec![0.0; design.total_columns()], design, Some(choices), rows)?;
    let all = vec![true; design.total_columns()];
    let mask = spec.unwrap_or(&all);
    let sub = if spec.is_some() {
        design.select_columns(mask)?
    } else {
        design.clone()
    };
    let columns: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();

    let collinear_local = collinear_columns(&sub, rows);
    let collinear: Vec<usize> = collinear_local.iter().map(|&k| columns[k]).collect();
    if !collinear.is_empty() {
        log::warn!("near-collinear design columns: {collinear:?}");
    }

    // Diagonal preconditioning: optimize γ = β·s with s the column RMS.
    let scale = column_rms(&sub, rows);
    let mut failure: Option<Error> = None;
    let objective = |gamma: &[f64]| {
        let b: Vec<f64> = gamma.iter().zip(&scale).map(|(g, s)| g / s).collect();
        match loglik_and_grad(&b, &sub, choices, rows) {
            Ok((ll, g)) => (-ll, g.iter().zip(&scale).map(|(x, s)| -x / s).collect()),
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, vec![f64::NAN; b.len()])
            }
        }
    };
    let s = options.bfgs;
    let result = bfgs::minimize(
        objective,
        vec![0.0; sub.total_columns()],
        &BfgsOptions {
            max_iterations: s.max_iterations,
            gradient_tolerance: s.gradient_tolerance,
            relative_tolerance: s.relative_tolerance,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let trace: Vec<f64> = result.trace.iter().map(|v| -v).collect();
    if !result.converged {
        return Err(Error::Fit {
            iterations: result.iterations,
            loglik: -result.value,
            trace,
        });
    }
    let beta: Vec<f64> = result.x.iter().zip(&scale).map(|(g, s)| g / s).collect();
    let mut values = vec![0.0; design.total_columns()];
    for (k, &c) in columns.iter().enumerate() {
        values[c] = beta[k];
    }
    let standard_errors = if options.standard_errors {
        let local = standard_errors(&beta, &sub, rows)?;
        let mut full = vec![None; design.total_columns()];
        for (k, &c) in columns.iter().enumerate() {
            full[c] = local[k];
        }
        Some(full)
    } else {
        None
    };
    Ok(MleFit {
        coefficients: MnlCoefficients::from_values(design.offsets(), values)?,
        loglik: -result.value,
        iterations: result.iterations,
        trace,
        gradient_max_norm: result.gradient.iter().zip(&scale).fold(0.0, |m: f64, (g, s)| m.max((g * s).abs())),
        collinear,
        standard_errors,
        columns,
    })
}

/// One exported coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub alternative: String,
    pub group: String,
    pub k: usize,
    pub label: String,
    /// Coefficient on the design column as fitted.
    pub value: f64,
    /// Coefficient on the unstandardized column `h(x)·δ`.
    pub raw: f64,
    /// Constant `−value·mean/sd` that the standardization adds on active rows.
    pub raw_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

/// Coefficients keyed by (alternative, group, k) with raw-scale values.
/// `standardized` says whether the design the coefficients refer to was standardized.
pub fn coefficient_table(
    beta: &MnlCoefficients,
    catalog: &CandidateCatalog,
    standardized: bool,
    std_errors: Option<&[Option<f64>]>,
    only_nonzero: bool,
) -> Result<Vec<CoefficientEntry>> {
    if beta.len() != catalog.total_columns() {
        return Err(Error::Argument("coefficients do not match the catalog".into()));
    }
    let mut out = Vec::new();
    for (c, meta) in catalog.columns.iter().enumerate() {
        let value = beta.values[c];
        if only_nonzero && value == 0.0 {
            continue;
        }
        let group = &catalog.groups[meta.group];
        let (raw, raw_offset) = match (standardized, meta.scaling) {
            (true, Some(s)) => (value / s.sd, -value * s.mean / s.sd),
            _ => (value, 0.0),
        };
        out.push(CoefficientEntry {
            alternative: catalog.alternatives[group.alternative].clone(),
            group: group.label.clone(),
            k: meta.position,
            label: meta.label.clone(),
            value,
            raw,
            raw_offset,
            std_error: std_errors.and_then(|s| s[c]),
        });
    }
    Ok(out)
}

/// Rebuild coefficients from an exported table.
pub fn coefficients_from_table(entries: &[CoefficientEntry], catalog: &CandidateCatalog) -> Result<MnlCoefficients> {
    let mut values = vec![0.0; catalog.total_columns()];
    for e in entries {
        let alt = catalog
            .alternative_index(&e.alternative)
            .ok_or_else(|| Error::Argument(format!("unknown alternative `{}`", e.alternative)))?;
        let g = catalog
            .find_group(alt, &e.group)
            .ok_or_else(|| Error::Argument(format!("unknown group `{}` for `{}`", e.group, e.alternative)))?;
        let cols = catalog.groups[g].columns.clone();
        if e.k >= cols.len() {
            return Err(Error::Argument(format!("group `{}` has no column {}", e.group, e.k)));
        }
        values[cols.start + e.k] = e.value;
    }
    MnlCoefficients::from_values(&catalog.offsets, values)
}

const COEFFICIENT_HEADER: [&str; 8] = ["alternative", "group", "k", "label", "value", "raw", "raw_offset", "std_error"];

/// Write a coefficient table as CSV; a missing standard error is an empty field.
pub fn write_coefficients_csv(entries: &[CoefficientEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        row: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    w.write_record(COEFFICIENT_HEADER)?;
    for e in entries {
        w.write_record([
            e.alternative.clone(),
            e.group.clone(),
            e.k.to_string(),
            e.label.clone(),
            e.value.to_string(),
            e.raw.to_string(),
            e.raw_offset.to_string(),
            e.std_error.map_or(String::new(), |s| s.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_coefficients_csv(path: impl AsRef<Path>) -> Result<Vec<CoefficientEntry>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        row: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    if r.headers()?.iter().ne(COEFFICIENT_HEADER) {
        return Err(Error::Parse {
            row: 0,
            message: format!("coefficient header must be {}", COEFFICIENT_HEADER.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            let e: CoefficientEntry = rec.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
            if !e.value.is_finite() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("non-finite coefficient {}", e.value),
                });
            }
            Ok(e)
        })
        .collect()
}
