//! Candidate search space: which transformed and interacted variables may
//! enter each alternative's utility, and how they are laid out as columns.

pub mod boxcox;
mod design;
pub mod kmeans;

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ChoiceDataset;
use crate::error::{Error, Result};

pub use boxcox::fit_boxcox;
pub use design::{materialize, read_tensor, write_tensor, DesignTensor};
pub use kmeans::{kmeans_segment, Segmentation};

/// Label of the alternative-specific constant.
pub const INTERCEPT: &str = "ASC";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Log,
    Boxcox,
}

/// One base variable with the transforms and interactions to enumerate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermConfig {
    /// Attribute name, or `ASC` for the intercept.
    pub base: String,
    #[serde(default = "default_transforms")]
    pub transforms: Vec<TransformKind>,
    #[serde(default)]
    pub interactions: Vec<String>,
}

fn default_transforms() -> Vec<TransformKind> {
    vec![TransformKind::Identity]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub attribute: String,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeSpace {
    pub name: String,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    /// Pad the alternative with Gaussian-noise candidates until it has this
    /// many columns.
    #[serde(default)]
    pub noise_target: Option<usize>,
}

/// Shift applied before log or Box-Cox when a column has non-positive values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftRule {
    /// Shift so the minimum becomes half the smallest positive value.
    #[default]
    Auto,
    /// Refuse non-positive inputs.
    None,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub alternatives: Vec<AlternativeSpace>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub shift: ShiftRule,
    /// Seed for k-means restarts.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_true() -> bool {
    true
}

impl SpaceConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    Intercept,
    Attribute(String),
    Noise(usize),
}

/// A fitted column transform h(·).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log { shift: f64 },
    BoxCox { exponent: f64, shift: f64 },
    /// Indicator of membership in one of `levels` (k-means segments).
    Segment { k: usize, centers: Vec<f64>, levels: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub attribute: String,
    pub categories: Vec<String>,
    /// Category indices that receive a column (the reference is excluded).
    pub levels: Vec<usize>,
}

/// A set of columns that share one prior variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub alternative: usize,
    pub label: String,
    pub base: Base,
    pub transform: Transform,
    pub interaction: Option<Interaction>,
    /// Global column indices.
    pub columns: Range<usize>,
}

impl CandidateGroup {
    pub fn size(&self) -> usize {
        self.columns.len()
    }

    /// Columns that hold 0/1 indicators (or constants) rather than
    /// continuous values; these are never standardized.
    pub fn is_indicator(&self) -> bool {
        matches!(self.base, Base::Intercept) || matches!(self.transform, Transform::Segment { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub label: String,
    pub group: usize,
    /// Position within the group (the `k` index).
    pub position: usize,
    pub scaling: Option<Scaling>,
}

/// The enumerated search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCatalog {
    pub alternatives: Vec<String>,
    pub groups: Vec<CandidateGroup>,
    /// Global column offset of each alternative; `offsets[J]` is the total.
    pub offsets: Vec<usize>,
    pub columns: Vec<ColumnMeta>,
    pub standardize: bool,
    pub noise_seed: u64,
}

impl CandidateCatalog {
    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn total_columns(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn width(&self, alt: usize) -> usize {
        self.offsets[alt + 1] - self.offsets[alt]
    }

    pub fn column_range(&self, alt: usize) -> Range<usize> {
        self.offsets[alt]..self.offsets[alt + 1]
    }

    pub fn alternative_of_column(&self, col: usize) -> usize {
        self.groups[self.columns[col].group].alternative
    }

    pub fn groups_of(&self, alt: usize) -> impl Iterator<Item = (usize, &CandidateGroup)> {
        self.groups.iter().enumerate().filter(move |(_, g)| g.alternative == alt)
    }

    pub fn alternative_index(&self, name: &str) -> Option<usize> {
        self.alternatives.iter().position(|a| a == name)
    }

    /// Index of the group labelled `label` in alternative `alt`.
    pub fn find_group(&self, alt: usize, label: &str) -> Option<usize> {
        self.groups_of(alt).find(|(_, g)| g.label == label).map(|(i, _)| i)
    }

    /// Group index for every global column.
    pub fn group_index(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.group).collect()
    }

    /// Column mask covering the given groups.
    pub fn column_mask(&self, groups: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.total_columns()];
        for &g in groups {
            for c in self.groups[g].columns.clone() {
                mask[c] = true;
            }
        }
        mask
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let catalog: CandidateCatalog = serde_json::from_str(&text)?;
        catalog.check_layout()?;
        Ok(catalog)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("catalog serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Every column belongs to exactly one group, and each alternative's
    /// groups tile its column range in order.
    pub fn check_layout(&self) -> Result<()> {
        let j = self.alternatives.len();
        if self.offsets.len() != j + 1 || self.offsets[0] != 0 {
            return Err(Error::Validation("catalog offsets malformed".into()));
        }
        let mut next = 0;
        for (gi, g) in self.groups.iter().enumerate() {
            if g.columns.start != next || g.columns.is_empty() {
                return Err(Error::Validation(format!("group `{}` is not contiguous", g.label)));
            }
            if !self.column_range(g.alternative).contains(&g.columns.start)
                || g.columns.end > self.offsets[g.alternative + 1]
            {
                return Err(Error::Validation(format!("group `{}` crosses alternatives", g.label)));
            }
            for c in g.columns.clone() {
                if self.columns.get(c).map(|m| m.group) != Some(gi) {
                    return Err(Error::Validation(format!("column {c} not owned by group {gi}")));
                }
            }
            next = g.columns.end;
        }
        if next != self.total_columns() || self.columns.len() != next {
            return Err(Error::Validation("groups do not cover all columns".into()));
        }
        Ok(())
    }
}

fn transform_label(kind: TransformKind, base: &str) -> String {
    match kind {
        TransformKind::Identity => base.to_string(),
        TransformKind::Log => format!("log({base})"),
        TransformKind::Boxcox => format!("box({base})"),
    }
}

fn resolve_shift(rule: ShiftRule, values: &[f64], column: &str) -> Result<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        return Ok(0.0);
    }
    let shift = match rule {
        ShiftRule::None => {
            return Err(Error::Transform {
                column: column.to_string(),
                message: format!("non-positive value {min} and no shift configured"),
            })
        }
        ShiftRule::Fixed(s) => s,
        ShiftRule::Auto => {
            let min_pos = values.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
            if !min_pos.is_finite() {
                return Err(Error::Transform {
                    column: column.to_string(),
                    message: "no positive values to derive a shift from".into(),
                });
            }
            min_pos / 2.0 - min
        }
    };
    if min + shift <= 0.0 {
        return Err(Error::Transform {
            column: column.to_string(),
            message: format!("shift {shift} leaves non-positive values"),
        });
    }
    Ok(shift)
}

/// Values of attribute `name` for alternative `alt` over rows where it is available.
fn available_values(data: &ChoiceDataset, alt: usize, name: &str) -> Result<Vec<f64>> {
    let attr = data
        .alt_attribute(name)
        .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))?;
    let col = attr.values[alt].as_ref().ok_or_else(|| {
        Error::Config(format!(
            "attribute `{name}` is not defined for alternative `{}`",
            data.alternatives()[alt]
        ))
    })?;
    Ok((0..data.len())
        .filter(|&r| data.is_available(r, alt))
        .map(|r| col[r])
        .collect())
}

struct Builder {
    groups: Vec<CandidateGroup>,
    next_column: usize,
}

impl Builder {
    fn push(&mut self, alternative: usize, label: String, base: Base, transform: Transform, interaction: Option<Interaction>) {
        let size = match (&transform, &interaction) {
            (Transform::Segment { levels, .. }, _) => levels.len(),
            (_, Some(i)) => i.levels.len(),
            _ => 1,
        };
        let columns = self.next_column..self.next_column + size;
        self.next_column += size;
        self.groups.push(CandidateGroup {
            alternative,
            label,
            base,
            transform,
            interaction,
            columns,
        });
    }
}

fn column_label(group: &CandidateGroup, position: usize) -> String {
    match (&group.transform, &group.interaction) {
        (Transform::Segment { levels, .. }, _) => format!("{}#{}", group.label, levels[position] + 1),
        (_, Some(i)) if i.levels.len() > 1 => format!("{}{}", group.label, position + 1),
        _ => group.label.clone(),
    }
}

/// Enumerate the candidate catalog for `data` under `config`.
pub fn build_catalog(data: &ChoiceDataset, config: &SpaceConfig) -> Result<CandidateCatalog> {
    let j = data.n_alternatives();
    for alt in &config.alternatives {
        if data.alternative_index(&alt.name).is_none() {
            return Err(Error::Config(format!("unknown alternative `{}`", alt.name)));
        }
    }
    let mut b = Builder {
        groups: Vec::new(),
        next_column: 0,
    };
    let mut offsets = vec![0];
    let mut noise_counter = 0;

    for (alt, alt_name) in data.alternatives().iter().enumerate() {
        let Some(space) = config.alternatives.iter().find(|a| &a.name == alt_name) else {
            offsets.push(b.next_column);
            continue;
        };
        let has_intercept = space.terms.iter().any(|t| t.base == INTERCEPT);

        let interactions = |names: &[String]| -> Result<Vec<Interaction>> {
            names
                .iter()
                .map(|name| {
                    let cat = data
                        .categorical(name)
                        .ok_or_else(|| Error::Config(format!("unknown interaction attribute `{name}`")))?;
                    if cat.categories.len() < 2 {
                        return Err(Error::Config(format!("`{name}` has fewer than two categories")));
                    }
                    Ok(Interaction {
                        attribute: name.clone(),
                        categories: cat.categories.clone(),
                        levels: (1..cat.categories.len()).collect(),
                    })
                })
                .collect()
        };

        for term in &space.terms {
            let inter = interactions(&term.interactions)?;
            if term.base == INTERCEPT {
                b.push(alt, INTERCEPT.into(), Base::Intercept, Transform::Identity, None);
                for i in inter {
                    let label = format!("{INTERCEPT} x {}", i.attribute);
                    b.push(alt, label, Base::Intercept, Transform::Identity, Some(i));
                }
                continue;
            }
            let values = available_values(data, alt, &term.base)?;
            let column_name = format!("{} of {alt_name}", term.base);
            for &kind in &term.transforms {
                let transform = match kind {
                    TransformKind::Identity => Transform::Identity,
                    TransformKind::Log => Transform::Log {
                        shift: resolve_shift(config.shift, &values, &column_name)?,
                    },
                    TransformKind::Boxcox => {
                        let shift = resolve_shift(config.shift, &values, &column_name)?;
                        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
                        let exponent = fit_boxcox(&shifted).map_err(|e| match e {
                            Error::Transform { message, .. } => Error::Transform {
                                column: column_name.clone(),
                                message,
                            },
                            other => other,
                        })?;
                        Transform::BoxCox { exponent, shift }
                    }
                };
                let label = transform_label(kind, &term.base);
                let base = Base::Attribute(term.base.clone());
                b.push(alt, label.clone(), base.clone(), transform.clone(), None);
                for i in &inter {
                    b.push(alt, format!("{label} x {}", i.attribute), base.clone(), transform.clone(), Some(i.clone()));
                }
            }
        }

        for seg in &space.segments {
            let values = available_values(data, alt, &seg.attribute)?;
            let fitted = kmeans_segment(&values, seg.k, config.seed)?;
            let first = usize::from(has_intercept);
            b.push(
                alt,
                format!("seg({},{})", seg.attribute, seg.k),
                Base::Attribute(seg.attribute.clone()),
                Transform::Segment {
                    k: seg.k,
                    centers: fitted.centers,
                    levels: (first..seg.k).collect(),
                },
                None,
            );
        }

        if let Some(target) = space.noise_target {
            let width = b.next_column - offsets[alt];
            for _ in width..target {
                noise_counter += 1;
                b.push(alt, format!("noise{noise_counter}"), Base::Noise(noise_counter), Transform::Identity, None);
            }
        }
        offsets.push(b.next_column);
    }
    debug_assert_eq!(offsets.len(), j + 1);

    let columns = b
        .groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| {
            (0..g.size()).map(move |p| ColumnMeta {
                label: column_label(g, p),
                group: gi,
                position: p,
                scaling: None,
            })
        })
        .collect();
    let mut catalog = CandidateCatalog {
        alternatives: data.alternatives().to_vec(),
        groups: b.groups,
        offsets,
        columns,
        standardize: config.standardize,
        noise_seed: config.noise_seed,
    };
    design::fit_scaling(data, &mut catalog)?;
    catalog.check_layout()?;
    Ok(catalog)
}
