use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GroupLayout, LambdaEstimate};
use crate::error::{Error, Result};
use crate::space::CandidateCatalog;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Keep groups with `λ > τ · max λ` of their alternative.
    #[default]
    Relative,
    /// Keep groups with `λ > τ`.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Selection {
    pub mode: SelectionMode,
    pub threshold: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Selection {
            mode: SelectionMode::Relative,
            threshold: 1e-3,
        }
    }
}

/// Groups of each alternative ordered by λ descending (ties by group index).
fn ranked(lambda: &LambdaEstimate, layout: &GroupLayout) -> Vec<Vec<usize>> {
    let mut per_alt = vec![Vec::new(); layout.n_alternatives];
    for (g, &alt) in layout.alternative.iter().enumerate() {
        per_alt[alt].push(g);
    }
    for groups in &mut per_alt {
        groups.sort_by(|&a, &b| lambda.values[b].total_cmp(&lambda.values[a]).then(a.cmp(&b)));
    }
    per_alt
}

/// Selected groups per alternative, ranked by λ descending.
pub fn select_variables(lambda: &LambdaEstimate, layout: &GroupLayout, rule: &Selection) -> Vec<Vec<usize>> {
    ranked(lambda, layout)
        .into_iter()
        .map(|groups| {
            let cutoff = match rule.mode {
                SelectionMode::Absolute => rule.threshold,
                SelectionMode::Relative => {
                    rule.threshold * groups.iter().map(|&g| lambda.values[g]).fold(0.0, f64::max)
                }
            };
            groups.into_iter().filter(|&g| lambda.values[g] > cutoff && lambda.values[g] > 0.0).collect()
        })
        .collect()
}

/// One line of the λ report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub alternative: String,
    pub group: String,
    pub lambda: f64,
    /// 1-based rank within the alternative.
    pub rank: usize,
    pub selected: bool,
}

/// Full ranked λ table, alternative by alternative.
pub fn lambda_table(lambda: &LambdaEstimate, catalog: &CandidateCatalog, rule: &Selection) -> Vec<LambdaRow> {
    let layout = GroupLayout::from_catalog(catalog);
    let selected = select_variables(lambda, &layout, rule);
    ranked(lambda, &layout)
        .into_iter()
        .enumerate()
        .flat_map(|(alt, groups)| {
            let selected = &selected[alt];
            groups
                .into_iter()
                .enumerate()
                .map(|(r, g)| LambdaRow {
                    alternative: catalog.alternatives[alt].clone(),
                    group: catalog.groups[g].label.clone(),
                    lambda: lambda.values[g],
                    rank: r + 1,
                    selected: selected.contains(&g),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn write_lambda_csv(rows: &[LambdaRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        row: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_lambda_csv(path: impl AsRef<Path>) -> Result<Vec<LambdaRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        row: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let headers = r.headers()?.clone();
    let expected = ["alternative", "group", "lambda", "rank", "selected"];
    if headers.iter().ne(expected) {
        return Err(Error::Parse {
            row: 0,
            message: format!("λ report header must be {}", expected.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            let row: LambdaRow = rec.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
            if !(row.lambda >= 0.0) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("invalid λ {}", row.lambda),
                });
            }
            Ok(row)
        })
        .collect()
}
