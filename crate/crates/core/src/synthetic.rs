//! Semi-artificial data: fit an MNL on a declared specification, then redraw
//! every choice from the fitted probabilities.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ChoiceDataset;
use crate::error::{Error, Result};
use crate::mnl::{fit_mle, predict, MleFit, MleOptions, MnlCoefficients};
use crate::space::{materialize, CandidateCatalog, DesignTensor};

/// Catalog group labels per alternative.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueSpecification {
    pub alternatives: BTreeMap<String, Vec<String>>,
}

impl TrueSpecification {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Group indices per alternative (catalog order of alternatives).
    pub fn resolve(&self, catalog: &CandidateCatalog) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![Vec::new(); catalog.n_alternatives()];
        for (alt_name, labels) in &self.alternatives {
            let alt = catalog
                .alternative_index(alt_name)
                .ok_or_else(|| Error::Argument(format!("unknown alternative `{alt_name}`")))?;
            for label in labels {
                let matches = catalog.groups_of(alt).filter(|(_, g)| &g.label == label).count();
                if matches != 1 {
                    return Err(Error::Argument(format!(
                        "group `{label}` of `{alt_name}` matches {matches} catalog groups"
                    )));
                }
                let g = catalog.find_group(alt, label).unwrap();
                if !out[alt].contains(&g) {
                    out[alt].push(g);
                }
            }
        }
        Ok(out)
    }

    /// Column mask of the specification.
    pub fn column_mask(&self, catalog: &CandidateCatalog) -> Result<Vec<bool>> {
        let groups: Vec<usize> = self.resolve(catalog)?.into_iter().flatten().collect();
        Ok(catalog.column_mask(&groups))
    }

    /// Labels per alternative for selected group indices.
    pub fn from_groups(groups: &[Vec<usize>], catalog: &CandidateCatalog) -> Self {
        TrueSpecification {
            alternatives: groups
                .iter()
                .enumerate()
                .map(|(alt, gs)| {
                    (
                        catalog.alternatives[alt].clone(),
                        gs.iter().map(|&g| catalog.groups[g].label.clone()).collect(),
                    )
                })
                .collect(),
        }
    }
}

/// Draw one choice per row from `P[n, ·]`, restricted to available alternatives.
pub fn sample_choices(probabilities: &[f64], availability: &[bool], n_alternatives: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    probabilities
        .chunks(n_alternatives)
        .zip(availability.chunks(n_alternatives))
        .map(|(p, av)| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = None;
            for i in 0..n_alternatives {
                if !av[i] {
                    continue;
                }
                last = Some(i);
                acc += p[i];
                if u < acc {
                    return i;
                }
            }
            last.expect("row has an available alternative")
        })
        .collect()
}

/// Outcome of [`generate`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub data: ChoiceDataset,
    pub coefficients: MnlCoefficients,
    pub fit: MleFit,
}

/// Fit `spec` by maximum likelihood on an already materialized design and
/// resample the choices.
pub fn generate_from_design(
    data: &ChoiceDataset,
    design: &DesignTensor,
    catalog: &CandidateCatalog,
    spec: &TrueSpecification,
    seed: u64,
) -> Result<Generated> {
    let mask = spec.column_mask(catalog)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let fit = fit_mle(design, data.choices(), &rows, Some(&mask), &MleOptions::default())?;
    let p = predict(&fit.coefficients, design, &rows)?;
    let choices = sample_choices(&p, data.availability(), data.n_alternatives(), seed);
    Ok(Generated {
        data: data.with_choices(choices)?,
        coefficients: fit.coefficients.clone(),
        fit,
    })
}

/// Fit `spec` on `data` and redraw its choices with `seed`. The design is
/// materialized with the catalog's own standardization setting.
pub fn generate(data: &ChoiceDataset, catalog: &CandidateCatalog, spec: &TrueSpecification, seed: u64) -> Result<Generated> {
    let design = materialize(data, catalog, catalog.standardize)?;
    generate_from_design(data, &design, catalog, spec, seed)
}
