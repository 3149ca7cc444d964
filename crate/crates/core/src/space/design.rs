use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::boxcox::boxcox;
use super::kmeans::nearest;
use super::{Base, CandidateCatalog, CandidateGroup, Scaling, Transform};
use crate::data::ChoiceDataset;
use crate::error::{Error, Result};

/// Expanded design values `v[n, i, col]` with the availability mask.
///
/// Each alternative owns a row-major `N × D_i` block; global column `c` of
/// alternative `i` lives at local index `c - offsets[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignTensor {
    n: usize,
    offsets: Vec<usize>,
    blocks: Vec<Vec<f64>>,
    availability: Vec<bool>,
}

impl DesignTensor {
    /// Build from per-alternative row-major blocks and an `N × J` availability mask.
    pub fn from_blocks(n: usize, widths: &[usize], blocks: Vec<Vec<f64>>, availability: Vec<bool>) -> Result<Self> {
        let j = widths.len();
        if blocks.len() != j || availability.len() != n * j {
            return Err(Error::Argument("design tensor shape mismatch".into()));
        }
        let mut offsets = vec![0];
        for (i, (&w, b)) in widths.iter().zip(&blocks).enumerate() {
            if b.len() != n * w {
                return Err(Error::Argument(format!("block {i} has {} values, expected {}", b.len(), n * w)));
            }
            if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::Transform {
                    column: format!("alternative {i} column {}", pos % w.max(1)),
                    message: format!("non-finite value at row {}", pos / w.max(1)),
                });
            }
            offsets.push(offsets[i] + w);
        }
        Ok(Self {
            n,
            offsets,
            blocks,
            availability,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_alternatives(&self) -> usize {
        self.blocks.len()
    }

    pub fn width(&self, alt: usize) -> usize {
        self.offsets[alt + 1] - self.offsets[alt]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_columns(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn availability(&self) -> &[bool] {
        &self.availability
    }

    pub fn is_available(&self, row: usize, alt: usize) -> bool {
        self.availability[row * self.blocks.len() + alt]
    }

    /// Design values of alternative `alt` for one row.
    pub fn row(&self, row: usize, alt: usize) -> &[f64] {
        let w = self.width(alt);
        &self.blocks[alt][row * w..(row + 1) * w]
    }

    /// Values of one global column over all rows.
    pub fn column(&self, col: usize) -> Vec<f64> {
        let alt = self.offsets.partition_point(|&o| o <= col) - 1;
        let w = self.width(alt);
        let local = col - self.offsets[alt];
        (0..self.n).map(|r| self.blocks[alt][r * w + local]).collect()
    }

    /// Tensor restricted to the masked global columns (in order).
    pub fn select_columns(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.total_columns() {
            return Err(Error::Argument("column mask length mismatch".into()));
        }
        let j = self.n_alternatives();
        let mut widths = Vec::with_capacity(j);
        let mut blocks = Vec::with_capacity(j);
        for alt in 0..j {
            let keep: Vec<usize> = (0..self.width(alt)).filter(|&l| mask[self.offsets[alt] + l]).collect();
            let mut block = Vec::with_capacity(self.n * keep.len());
            for r in 0..self.n {
                let row = self.row(r, alt);
                block.extend(keep.iter().map(|&l| row[l]));
            }
            widths.push(keep.len());
            blocks.push(block);
        }
        Self::from_blocks(self.n, &widths, blocks, self.availability.clone())
    }

    /// Tensor restricted to the given rows (in order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let j = self.n_alternatives();
        let blocks = (0..j)
            .map(|alt| rows.iter().flat_map(|&r| self.row(r, alt).iter().copied()).collect())
            .collect();
        let availability = rows
            .iter()
            .flat_map(|&r| self.availability[r * j..(r + 1) * j].iter().copied())
            .collect();
        Self {
            n: rows.len(),
            offsets: self.offsets.clone(),
            blocks,
            availability,
        }
    }
}

/// Per-row values of a group's base transform, `None` where the alternative
/// is unavailable.
fn base_values(data: &ChoiceDataset, catalog: &CandidateCatalog, group: &CandidateGroup) -> Result<Vec<Option<f64>>> {
    let alt = group.alternative;
    let n = data.len();
    let avail = |r: usize| data.is_available(r, alt);
    let values = match &group.base {
        Base::Intercept => (0..n).map(|r| avail(r).then_some(1.0)).collect(),
        Base::Noise(index) => {
            let mut rng = ChaCha8Rng::seed_from_u64(catalog.noise_seed);
            rng.set_stream(*index as u64);
            (0..n)
                .map(|r| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    avail(r).then_some(z)
                })
                .collect()
        }
        Base::Attribute(name) => {
            let raw = data
                .alt_attribute(name)
                .and_then(|a| a.values[alt].as_ref())
                .ok_or_else(|| Error::Config(format!("attribute `{name}` missing for alternative {alt}")))?;
            let mut out = Vec::with_capacity(n);
            for (r, &x) in raw.iter().enumerate() {
                if !avail(r) {
                    out.push(None);
                    continue;
                }
                let v = match &group.transform {
                    Transform::Identity => x,
                    Transform::Log { shift } => (x + shift).ln(),
                    Transform::BoxCox { exponent, shift } => boxcox(x + shift, *exponent),
                    Transform::Segment { centers, .. } => nearest(centers, x) as f64,
                };
                if !v.is_finite() {
                    return Err(Error::Transform {
                        column: format!("{} of {}", group.label, catalog.alternatives[alt]),
                        message: format!("non-finite value at row {}", r + 1),
                    });
                }
                out.push(Some(v));
            }
            out
        }
    };
    Ok(values)
}

/// Unstandardized columns of a group, plus the rows where each column's
/// indicator is active.
fn group_columns(data: &ChoiceDataset, catalog: &CandidateCatalog, group: &CandidateGroup) -> Result<Vec<(Vec<f64>, Vec<bool>)>> {
    let base = base_values(data, catalog, group)?;
    let category = match &group.interaction {
        Some(inter) => Some(
            data.categorical(&inter.attribute)
                .ok_or_else(|| Error::Config(format!("unknown interaction attribute `{}`", inter.attribute)))?,
        ),
        None => None,
    };
    let columns = (0..group.size())
        .map(|p| {
            let active: Vec<bool> = base
                .iter()
                .enumerate()
                .map(|(r, b)| {
                    b.is_some()
                        && match (&group.transform, &group.interaction, category) {
                            (_, Some(inter), Some(cat)) => cat.values[r] == inter.levels[p],
                            _ => true,
                        }
                })
                .collect();
            let values = base
                .iter()
                .zip(&active)
                .map(|(b, &on)| match (on, b, &group.transform) {
                    (false, _, _) | (_, None, _) => 0.0,
                    (true, Some(label), Transform::Segment { levels, .. }) => f64::from(*label as usize == levels[p]),
                    (true, Some(v), _) => *v,
                })
                .collect();
            (values, active)
        })
        .collect();
    Ok(columns)
}

/// Record mean and standard deviation of each continuous column over its
/// active rows. Columns with no spread keep no scaling.
pub(super) fn fit_scaling(data: &ChoiceDataset, catalog: &mut CandidateCatalog) -> Result<()> {
    for gi in 0..catalog.groups.len() {
        let group = &catalog.groups[gi];
        if group.is_indicator() {
            continue;
        }
        let start = group.columns.start;
        for (p, (values, active)) in group_columns(data, catalog, group)?.into_iter().enumerate() {
            let sample: Vec<f64> = values.iter().zip(&active).filter(|(_, &a)| a).map(|(&v, _)| v).collect();
            let scaling = if sample.len() >= 2 {
                let n = sample.len() as f64;
                let mean = sample.iter().sum::<f64>() / n;
                let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (var.sqrt() > 1e-12 * mean.abs().max(1.0)).then(|| Scaling { mean, sd: var.sqrt() })
            } else {
                None
            };
            catalog.columns[start + p].scaling = scaling;
        }
    }
    Ok(())
}

/// Expand `data` into design values under `catalog`. With `standardize`, each
/// continuous column is centred and scaled over its active rows using the
/// catalog's scaling records.
pub fn materialize(data: &ChoiceDataset, catalog: &CandidateCatalog, standardize: bool) -> Result<DesignTensor> {
    if data.alternatives() != catalog.alternatives.as_slice() {
        return Err(Error::Argument("catalog and dataset alternatives differ".into()));
    }
    let n = data.len();
    let columns: Vec<Vec<f64>> = catalog
        .groups
        .par_iter()
        .map(|group| -> Result<Vec<Vec<f64>>> {
            Ok(group_columns(data, catalog, group)?
                .into_iter()
                .enumerate()
                .map(|(p, (mut values, active))| {
                    let scaling = catalog.columns[group.columns.start + p].scaling;
                    if let (true, Some(s)) = (standardize, scaling) {
                        for (v, a) in values.iter_mut().zip(active) {
                            if a {
                                *v = (*v - s.mean) / s.sd;
                            }
                        }
                    }
                    values
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let j = catalog.n_alternatives();
    let widths: Vec<usize> = (0..j).map(|i| catalog.width(i)).collect();
    let blocks = (0..j)
        .map(|alt| {
            let range = catalog.column_range(alt);
            let mut block = Vec::with_capacity(n * range.len());
            for r in 0..n {
                block.extend(range.clone().map(|c| columns[c][r]));
            }
            block
        })
        .collect();
    DesignTensor::from_blocks(n, &widths, blocks, data.availability().to_vec())
}

/// Write the tensor as CSV: `choice`, `av:<alt>` flags, then `<alt>:<label>`
/// for every column.
pub fn write_tensor(design: &DesignTensor, catalog: &CandidateCatalog, choices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if choices.len() != design.n_rows() || catalog.total_columns() != design.total_columns() {
        return Err(Error::Argument("tensor, catalog and choices disagree in shape".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = vec!["choice".to_string()];
    header.extend(catalog.alternatives.iter().map(|a| format!("av:{a}")));
    for (c, meta) in catalog.columns.iter().enumerate() {
        header.push(format!("{}:{}", catalog.alternatives[catalog.alternative_of_column(c)], meta.label));
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let j = design.n_alternatives();
    let mut line = String::new();
    for (r, &choice) in choices.iter().enumerate() {
        line.clear();
        line.push_str(&choice.to_string());
        for alt in 0..j {
            line.push_str(if design.is_available(r, alt) { ",1" } else { ",0" });
        }
        for alt in 0..j {
            for v in design.row(r, alt) {
                line.push(',');
                line.push_str(&v.to_string());
            }
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Read a tensor written by [`write_tensor`], checking its header against the catalog.
pub fn read_tensor(path: impl AsRef<Path>, catalog: &CandidateCatalog) -> Result<(DesignTensor, Vec<usize>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            row: 0,
            message: format!("{}: {e}", path.display()),
        })?;
    let j = catalog.n_alternatives();
    let d = catalog.total_columns();
    let headers = reader.headers()?.clone();
    if headers.len() != 1 + j + d {
        return Err(Error::Validation(format!(
            "tensor has {} columns, catalog expects {}",
            headers.len(),
            1 + j + d
        )));
    }
    for (c, meta) in catalog.columns.iter().enumerate() {
        let expected = format!("{}:{}", catalog.alternatives[catalog.alternative_of_column(c)], meta.label);
        if headers[1 + j + c] != expected {
            return Err(Error::Validation(format!(
                "tensor column `{}` does not match catalog column `{expected}`",
                &headers[1 + j + c]
            )));
        }
    }
    let mut choices = Vec::new();
    let mut availability = Vec::new();
    let mut blocks: Vec<Vec<f64>> = vec![Vec::new(); j];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let num = |k: usize| -> Result<f64> {
            record[k].trim().parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value `{}` in column {}", &record[k], k + 1),
            })
        };
        let choice = num(0)?;
        if choice < 0.0 || choice as usize >= j || choice.fract() != 0.0 {
            return Err(Error::Parse {
                row,
                message: format!("invalid choice index {choice}"),
            });
        }
        choices.push(choice as usize);
        for alt in 0..j {
            availability.push(num(1 + alt)? != 0.0);
        }
        for (c, meta) in catalog.columns.iter().enumerate() {
            let _ = meta;
            blocks[catalog.alternative_of_column(c)].push(num(1 + j + c)?);
        }
    }
    let widths: Vec<usize> = (0..j).map(|i| catalog.width(i)).collect();
    let design = DesignTensor::from_blocks(choices.len(), &widths, blocks, availability)?;
    Ok((design, choices))
}
