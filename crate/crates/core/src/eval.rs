//! Model scoring and specification recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mnl::{fit_mle, log_likelihood, predict, MleOptions, MnlCoefficients};
use crate::space::{CandidateCatalog, DesignTensor};
use crate::synthetic::TrueSpecification;

/// Log-likelihood and accuracy on one row subset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub n: usize,
    pub loglik: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// Number of estimated (non-zero) coefficients.
    pub parameters: usize,
    pub loglik: f64,
    /// Equal shares over each row's available alternatives: `Σ −log|C_n|`.
    pub loglik_null: f64,
    /// Intercept-only (market share) log-likelihood.
    pub loglik_market: f64,
    pub aic: f64,
    pub bic: f64,
    /// `1 − loglik / loglik_null`.
    pub pseudo_r2: f64,
    /// `1 − (loglik − k) / loglik_null`.
    pub pseudo_r2_adjusted: f64,
    /// `1 − loglik / loglik_market`.
    pub pseudo_r2_market: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<SubsetMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<SubsetMetrics>,
}

/// Equal-probability log-likelihood over the available alternatives.
pub fn null_loglik(design: &DesignTensor, rows: &[usize]) -> f64 {
    let j = design.n_alternatives();
    rows.iter()
        .map(|&r| -((0..j).filter(|&i| design.is_available(r, i)).count() as f64).ln())
        .sum()
}

/// Log-likelihood of the best intercept-only model.
pub fn market_share_loglik(design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<f64> {
    let j = design.n_alternatives();
    let n = design.n_rows();
    let widths: Vec<usize> = (0..j).map(|i| usize::from(i + 1 < j)).collect();
    let blocks = widths.iter().map(|&w| vec![1.0; n * w]).collect();
    let intercepts = DesignTensor::from_blocks(n, &widths, blocks, design.availability().to_vec())?;
    Ok(fit_mle(&intercepts, choices, rows, None, &MleOptions::default())?.loglik)
}

/// Share of rows whose most probable available alternative (lowest index on
/// ties) is the observed choice.
pub fn accuracy(model: &MnlCoefficients, design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let j = design.n_alternatives();
    let p = predict(model, design, rows)?;
    let hits = rows
        .iter()
        .enumerate()
        .filter(|&(k, &r)| {
            let pr = &p[k * j..(k + 1) * j];
            let mut best = None;
            for i in 0..j {
                if design.is_available(r, i) && best.is_none_or(|b: usize| pr[i] > pr[b]) {
                    best = Some(i);
                }
            }
            best == Some(choices[r])
        })
        .count();
    Ok(hits as f64 / rows.len() as f64)
}

/// Information criteria and pseudo-R² from their ingredients.
pub fn criteria(loglik: f64, k: usize, n: usize, null: f64) -> (f64, f64, f64, f64) {
    let k = k as f64;
    (
        2.0 * k - 2.0 * loglik,
        k * (n as f64).ln() - 2.0 * loglik,
        1.0 - loglik / null,
        1.0 - (loglik - k) / null,
    )
}

fn subset(model: &MnlCoefficients, design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<SubsetMetrics> {
    Ok(SubsetMetrics {
        n: rows.len(),
        loglik: log_likelihood(model, design, choices, rows)?,
        accuracy: accuracy(model, design, choices, rows)?,
    })
}

/// Score `model` on `rows`.
pub fn evaluate(model: &MnlCoefficients, design: &DesignTensor, choices: &[usize], rows: &[usize]) -> Result<EvalReport> {
    let k = model.values.iter().filter(|&&b| b != 0.0).count();
    let loglik = log_likelihood(model, design, choices, rows)?;
    let loglik_null = null_loglik(design, rows);
    let loglik_market = market_share_loglik(design, choices, rows)?;
    let (aic, bic, pseudo_r2, pseudo_r2_adjusted) = criteria(loglik, k, rows.len(), loglik_null);
    Ok(EvalReport {
        n: rows.len(),
        parameters: k,
        loglik,
        loglik_null,
        loglik_market,
        aic,
        bic,
        pseudo_r2,
        pseudo_r2_adjusted,
        pseudo_r2_market: 1.0 - loglik / loglik_market,
        accuracy: accuracy(model, design, choices, rows)?,
        train: None,
        test: None,
    })
}

/// Score on the union of `train` and `test`, plus each part separately.
pub fn evaluate_split(
    model: &MnlCoefficients,
    design: &DesignTensor,
    choices: &[usize],
    train: &[usize],
    test: &[usize],
) -> Result<EvalReport> {
    let mut all: Vec<usize> = train.iter().chain(test).copied().collect();
    all.sort_unstable();
    let mut report = evaluate(model, design, choices, &all)?;
    report.train = Some(subset(model, design, choices, train)?);
    report.test = Some(subset(model, design, choices, test)?);
    Ok(report)
}

/// Aligned text table with one column per named report.
pub fn format_table(reports: &[(String, EvalReport)]) -> String {
    let mut lines: Vec<(String, Vec<String>)> = Vec::new();
    let mut row = |name: &str, f: &dyn Fn(&EvalReport) -> String| {
        lines.push((name.to_string(), reports.iter().map(|(_, r)| f(r)).collect()));
    };
    row("Parameters", &|r| r.parameters.to_string());
    row("Log-like full", &|r| format!("{:.1}", r.loglik));
    row("AIC", &|r| format!("{:.1}", r.aic));
    row("BIC", &|r| format!("{:.1}", r.bic));
    row("Pseudo-R2", &|r| format!("{:.3}", r.pseudo_r2));
    row("Pseudo-R2 adj", &|r| format!("{:.3}", r.pseudo_r2_adjusted));
    row("Log-like train", &|r| r.train.map_or("-".into(), |m| format!("{:.1}", m.loglik)));
    row("Log-like test", &|r| r.test.map_or("-".into(), |m| format!("{:.1}", m.loglik)));
    row("Accuracy train", &|r| r.train.map_or("-".into(), |m| format!("{:.3}", m.accuracy)));
    row("Accuracy test", &|r| r.test.map_or("-".into(), |m| format!("{:.3}", m.accuracy)));

    let label_w = lines.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..reports.len())
        .map(|c| {
            lines
                .iter()
                .map(|(_, v)| v[c].len())
                .chain([reports[c].0.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = format!("{:label_w$}", "");
    for ((name, _), w) in reports.iter().zip(&widths) {
        out.push_str(&format!("  {name:>w$}"));
    }
    out.push('\n');
    for (name, values) in &lines {
        out.push_str(&format!("{name:label_w$}"));
        for (v, w) in values.iter().zip(&widths) {
            out.push_str(&format!("  {v:>w$}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeRecovery {
    pub alternative: String,
    pub truth: Vec<String>,
    pub selected: Vec<String>,
    pub exact: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub alternatives: Vec<AlternativeRecovery>,
    /// True when every alternative matches exactly.
    pub exact: bool,
}

/// Compare selected group labels with the truth, alternative by alternative.
/// An empty selection has precision 1; an empty truth has recall 1.
pub fn recovery(selected: &TrueSpecification, truth: &TrueSpecification, catalog: &CandidateCatalog) -> Result<RecoveryReport> {
    let sel = selected.resolve(catalog)?;
    let tru = truth.resolve(catalog)?;
    let alternatives: Vec<AlternativeRecovery> = (0..catalog.n_alternatives())
        .map(|alt| {
            let hits = sel[alt].iter().filter(|g| tru[alt].contains(g)).count() as f64;
            let precision = if sel[alt].is_empty() { 1.0 } else { hits / sel[alt].len() as f64 };
            let recall = if tru[alt].is_empty() { 1.0 } else { hits / tru[alt].len() as f64 };
            let labels = |gs: &[usize]| gs.iter().map(|&g| catalog.groups[g].label.clone()).collect();
            AlternativeRecovery {
                alternative: catalog.alternatives[alt].clone(),
                truth: labels(&tru[alt]),
                selected: labels(&sel[alt]),
                exact: precision == 1.0 && recall == 1.0,
                precision,
                recall,
            }
        })
        .collect();
    Ok(RecoveryReport {
        exact: alternatives.iter().all(|a| a.exact),
        alternatives,
    })
}

/// Recovery from group indices, as produced by variable selection.
pub fn recovery_from_groups(selected: &[Vec<usize>], truth: &TrueSpecification, catalog: &CandidateCatalog) -> Result<RecoveryReport> {
    if selected.len() != catalog.n_alternatives() {
        return Err(Error::Argument("one selected set per alternative expected".into()));
    }
    recovery(&TrueSpecification::from_groups(selected, catalog), truth, catalog)
}
