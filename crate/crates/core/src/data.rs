//! Choice datasets: schema, loading with filter rules, splitting and writing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One alternative of the universal choice set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub name: String,
    /// Column holding the 0/1 availability flag. `None` means always available.
    #[serde(default)]
    pub availability: Option<String>,
    /// Value of the choice column that denotes this alternative.
    pub choice_code: String,
}

/// A continuous attribute that varies by alternative (travel time, cost, ...).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AltAttributeSpec {
    pub name: String,
    /// Alternative name to source column. Alternatives without an entry do not
    /// carry the attribute.
    pub columns: BTreeMap<String, String>,
}

/// Regrouping of source categories into coarser ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMerge {
    /// Target categories, in declared order.
    pub categories: Vec<String>,
    /// Source category to target category.
    pub map: BTreeMap<String, String>,
}

/// A categorical attribute of the decision maker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub column: String,
    /// Declared categories in order. The first one is the reference level.
    pub categories: Vec<String>,
    /// Codes that mean "not available"; rows carrying them are dropped.
    #[serde(default)]
    pub missing: Vec<String>,
    #[serde(default)]
    pub merge: Option<CategoryMerge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    /// Drop rows whose chosen alternative is flagged unavailable.
    pub drop_unavailable_choice: bool,
    /// Drop rows where an available alternative has a zero or negative
    /// attribute value.
    pub drop_nonpositive: bool,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            drop_unavailable_choice: true,
            drop_nonpositive: false,
        }
    }
}

/// Column-name-to-role mapping for wide-format choice data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub alternatives: Vec<AlternativeSpec>,
    pub choice_column: String,
    pub id_column: String,
    #[serde(default)]
    pub alternative_attributes: Vec<AltAttributeSpec>,
    #[serde(default)]
    pub individual_attributes: Vec<CategoricalSpec>,
    #[serde(default)]
    pub filters: FilterRules,
}

impl DatasetSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: DatasetSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alternatives.len() < 2 {
            return Err(Error::Config("at least two alternatives are required".into()));
        }
        let mut names = HashSet::new();
        let mut codes = HashSet::new();
        for alt in &self.alternatives {
            if !names.insert(alt.name.as_str()) {
                return Err(Error::Config(format!("duplicate alternative `{}`", alt.name)));
            }
            if !codes.insert(alt.choice_code.as_str()) {
                return Err(Error::Config(format!("duplicate choice code `{}`", alt.choice_code)));
            }
        }
        // Roles must be disjoint over the columns they claim.
        let mut used: HashMap<String, String> = HashMap::new();
        let mut claim = |col: &str, role: String| -> Result<()> {
            if let Some(prev) = used.insert(col.to_string(), role.clone()) {
                return Err(Error::Config(format!(
                    "column `{col}` is claimed by both {prev} and {role}"
                )));
            }
            Ok(())
        };
        claim(&self.choice_column, "choice".into())?;
        claim(&self.id_column, "id".into())?;
        for alt in &self.alternatives {
            if let Some(col) = &alt.availability {
                claim(col, format!("availability of {}", alt.name))?;
            }
        }
        let mut attr_names = HashSet::new();
        for attr in &self.alternative_attributes {
            if !attr_names.insert(attr.name.as_str()) {
                return Err(Error::Config(format!("duplicate attribute `{}`", attr.name)));
            }
            for (alt, col) in &attr.columns {
                if !names.contains(alt.as_str()) {
                    return Err(Error::Config(format!(
                        "attribute `{}` references unknown alternative `{alt}`",
                        attr.name
                    )));
                }
                claim(col, format!("attribute {} of {alt}", attr.name))?;
            }
        }
        for cat in &self.individual_attributes {
            if !attr_names.insert(cat.name.as_str()) {
                return Err(Error::Config(format!("duplicate attribute `{}`", cat.name)));
            }
            claim(&cat.column, format!("categorical {}", cat.name))?;
            if cat.categories.is_empty() {
                return Err(Error::Config(format!("`{}` declares no categories", cat.name)));
            }
            if let Some(merge) = &cat.merge {
                for source in cat.categories.iter().filter(|c| !cat.missing.contains(c)) {
                    match merge.map.get(source) {
                        Some(target) if merge.categories.contains(target) => {}
                        Some(target) => {
                            return Err(Error::Config(format!(
                                "merge of `{}` maps to undeclared category `{target}`",
                                cat.name
                            )))
                        }
                        None => {
                            return Err(Error::Config(format!(
                                "merge of `{}` is not total: category `{source}` unmapped",
                                cat.name
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Continuous attribute values per alternative. `None` when the alternative
/// does not carry the attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltAttribute {
    pub name: String,
    pub values: Vec<Option<Vec<f64>>>,
}

/// Categorical attribute with values stored as indices into `categories`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalAttribute {
    pub name: String,
    pub categories: Vec<String>,
    pub values: Vec<usize>,
}

/// Immutable table of observed choices.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceDataset {
    alternatives: Vec<String>,
    availability: Vec<bool>,
    choice: Vec<usize>,
    alt_attributes: Vec<AltAttribute>,
    indiv_attributes: Vec<CategoricalAttribute>,
    individual_id: Vec<String>,
}

impl ChoiceDataset {
    /// Assemble a dataset, checking every invariant. `availability` is row-major
    /// (`n * alternatives.len()`).
    pub fn new(
        alternatives: Vec<String>,
        availability: Vec<bool>,
        choice: Vec<usize>,
        alt_attributes: Vec<AltAttribute>,
        indiv_attributes: Vec<CategoricalAttribute>,
        individual_id: Vec<String>,
    ) -> Result<Self> {
        let n = choice.len();
        let j = alternatives.len();
        if j < 2 {
            return Err(Error::Validation("at least two alternatives are required".into()));
        }
        if n == 0 {
            return Err(Error::Validation("dataset has no observations".into()));
        }
        if availability.len() != n * j || individual_id.len() != n {
            return Err(Error::Validation("column lengths disagree with observation count".into()));
        }
        for (row, &c) in choice.iter().enumerate() {
            if c >= j {
                return Err(Error::Validation(format!("row {row}: choice index {c} out of range")));
            }
            if !availability[row * j + c] {
                return Err(Error::Validation(format!("row {row}: chosen alternative unavailable")));
            }
        }
        for attr in &alt_attributes {
            if attr.values.len() != j {
                return Err(Error::Validation(format!(
                    "attribute `{}` must list every alternative",
                    attr.name
                )));
            }
            for (alt, col) in attr.values.iter().enumerate() {
                if let Some(col) = col {
                    if col.len() != n {
                        return Err(Error::Validation(format!("attribute `{}` has wrong length", attr.name)));
                    }
                    for (row, v) in col.iter().enumerate() {
                        if availability[row * j + alt] && !v.is_finite() {
                            return Err(Error::Validation(format!(
                                "attribute `{}` of `{}` is missing at row {row}",
                                attr.name, alternatives[alt]
                            )));
                        }
                    }
                }
            }
        }
        for cat in &indiv_attributes {
            if cat.values.len() != n {
                return Err(Error::Validation(format!("attribute `{}` has wrong length", cat.name)));
            }
            if let Some(bad) = cat.values.iter().position(|&v| v >= cat.categories.len()) {
                return Err(Error::Validation(format!(
                    "attribute `{}` out of category range at row {bad}",
                    cat.name
                )));
            }
        }
        Ok(ChoiceDataset {
            alternatives,
            availability,
            choice,
            alt_attributes,
            indiv_attributes,
            individual_id,
        })
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn alternative_index(&self, name: &str) -> Option<usize> {
        self.alternatives.iter().position(|a| a == name)
    }

    pub fn availability(&self) -> &[bool] {
        &self.availability
    }

    pub fn is_available(&self, row: usize, alt: usize) -> bool {
        self.availability[row * self.alternatives.len() + alt]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    pub fn individual_ids(&self) -> &[String] {
        &self.individual_id
    }

    pub fn n_individuals(&self) -> usize {
        self.individual_id.iter().collect::<HashSet<_>>().len()
    }

    pub fn alt_attributes(&self) -> &[AltAttribute] {
        &self.alt_attributes
    }

    pub fn alt_attribute(&self, name: &str) -> Option<&AltAttribute> {
        self.alt_attributes.iter().find(|a| a.name == name)
    }

    pub fn categorical(&self, name: &str) -> Option<&CategoricalAttribute> {
        self.indiv_attributes.iter().find(|a| a.name == name)
    }

    pub fn categoricals(&self) -> &[CategoricalAttribute] {
        &self.indiv_attributes
    }

    /// Same attributes and availability, different observed choices.
    pub fn with_choices(&self, choice: Vec<usize>) -> Result<Self> {
        ChoiceDataset::new(
            self.alternatives.clone(),
            self.availability.clone(),
            choice,
            self.alt_attributes.clone(),
            self.indiv_attributes.clone(),
            self.individual_id.clone(),
        )
    }

    /// Rows `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let j = self.alternatives.len();
        let availability = rows
            .iter()
            .flat_map(|&r| self.availability[r * j..(r + 1) * j].iter().copied())
            .collect();
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        let alt_attributes = self
            .alt_attributes
            .iter()
            .map(|a| AltAttribute {
                name: a.name.clone(),
                values: a.values.iter().map(|c| c.as_deref().map(pick)).collect(),
            })
            .collect();
        let indiv_attributes = self
            .indiv_attributes
            .iter()
            .map(|c| CategoricalAttribute {
                name: c.name.clone(),
                categories: c.categories.clone(),
                values: rows.iter().map(|&r| c.values[r]).collect(),
            })
            .collect();
        ChoiceDataset::new(
            self.alternatives.clone(),
            availability,
            rows.iter().map(|&r| self.choice[r]).collect(),
            alt_attributes,
            indiv_attributes,
            rows.iter().map(|&r| self.individual_id[r].clone()).collect(),
        )
    }
}

/// Counts of rows removed by the filter rules, keyed by reason.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub dropped: BTreeMap<String, usize>,
}

impl LoadReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    fn drop(&mut self, reason: &str) {
        *self.dropped.entry(reason.to_string()).or_default() += 1;
    }
}

fn detect_delimiter(path: &Path) -> Result<u8> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') {
            continue;
        }
        return Ok(if line.contains('\t') { b'\t' } else { b',' });
    }
    Ok(b',')
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "null")
}

fn parse_number(s: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if is_missing_token(s) {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}`: `{s}` is not a number"),
    })
}

/// Load a wide-format delimited file (comma or tab, detected from the
/// header) under `schema`, dropping rows that violate the filter rules.
pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<(ChoiceDataset, LoadReport)> {
    let path = path.as_ref();
    schema.validate()?;
    let delimiter = detect_delimiter(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in {}", path.display())))
    };

    let j = schema.alternatives.len();
    let choice_col = col(&schema.choice_column)?;
    let id_col = col(&schema.id_column)?;
    let av_cols = schema
        .alternatives
        .iter()
        .map(|a| a.availability.as_deref().map(col).transpose())
        .collect::<Result<Vec<_>>>()?;
    let alt_name_index: HashMap<&str, usize> = schema
        .alternatives
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let attr_cols = schema
        .alternative_attributes
        .iter()
        .map(|attr| {
            let mut per_alt = vec![None; j];
            for (alt, c) in &attr.columns {
                per_alt[alt_name_index[alt.as_str()]] = Some((col(c)?, c.clone()));
            }
            Ok(per_alt)
        })
        .collect::<Result<Vec<_>>>()?;
    let cat_cols = schema
        .individual_attributes
        .iter()
        .map(|c| col(&c.column))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut availability = Vec::new();
    let mut choice = Vec::new();
    let mut ids = Vec::new();
    let mut attr_values: Vec<Vec<Vec<f64>>> = schema
        .alternative_attributes
        .iter()
        .map(|_| vec![Vec::new(); j])
        .collect();
    let mut cat_values: Vec<Vec<usize>> = vec![Vec::new(); schema.individual_attributes.len()];

    let mut row_av = vec![false; j];
    let mut row_attr: Vec<Vec<f64>> = schema.alternative_attributes.iter().map(|_| vec![0.0; j]).collect();
    let mut row_cat = vec![0usize; schema.individual_attributes.len()];

    'rows: for (idx, record) in reader.records().enumerate() {
        // Row numbers are 1-based data rows (the header is row 0).
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        report.rows_read += 1;

        let code = record[choice_col].trim();
        let Some(chosen) = schema.alternatives.iter().position(|a| a.choice_code == code) else {
            report.drop("unknown choice code");
            continue;
        };

        for (alt, av_col) in av_cols.iter().enumerate() {
            row_av[alt] = match av_col {
                None => true,
                Some(c) => match parse_number(&record[*c], row, &headers[*c])? {
                    Some(v) => v != 0.0,
                    None => {
                        report.drop("missing availability");
                        continue 'rows;
                    }
                },
            };
        }
        if !row_av[chosen] {
            if schema.filters.drop_unavailable_choice {
                report.drop("chosen alternative unavailable");
                continue;
            }
            return Err(Error::Validation(format!("row {row}: chosen alternative unavailable")));
        }

        for (a, cols) in attr_cols.iter().enumerate() {
            for (alt, c) in cols.iter().enumerate() {
                let Some((c, name)) = c else { continue };
                let value = parse_number(&record[*c], row, name)?;
                row_attr[a][alt] = match value {
                    Some(v) if row_av[alt] && schema.filters.drop_nonpositive && v <= 0.0 => {
                        report.drop("non-positive attribute");
                        continue 'rows;
                    }
                    Some(v) => v,
                    None if row_av[alt] => {
                        report.drop("missing attribute");
                        continue 'rows;
                    }
                    None => 0.0,
                };
            }
        }

        for (k, spec) in schema.individual_attributes.iter().enumerate() {
            let raw = record[cat_cols[k]].trim();
            if is_missing_token(raw) || spec.missing.iter().any(|m| m == raw) {
                report.drop("missing categorical");
                continue 'rows;
            }
            let Some(source) = spec.categories.iter().position(|c| c == raw) else {
                report.drop("unknown category");
                continue 'rows;
            };
            row_cat[k] = match &spec.merge {
                None => source,
                Some(m) => {
                    let target = &m.map[&spec.categories[source]];
                    m.categories.iter().position(|c| c == target).unwrap()
                }
            };
        }

        availability.extend_from_slice(&row_av);
        choice.push(chosen);
        ids.push(record[id_col].trim().to_string());
        for (a, vals) in attr_values.iter_mut().enumerate() {
            for (alt, v) in vals.iter_mut().enumerate() {
                v.push(row_attr[a][alt]);
            }
        }
        for (k, vals) in cat_values.iter_mut().enumerate() {
            vals.push(row_cat[k]);
        }
    }

    if choice.is_empty() {
        return Err(Error::Validation(format!(
            "no observations left in {} after filtering ({} read)",
            path.display(),
            report.rows_read
        )));
    }

    let alt_attributes = schema
        .alternative_attributes
        .iter()
        .zip(attr_values)
        .map(|(spec, vals)| AltAttribute {
            name: spec.name.clone(),
            values: vals
                .into_iter()
                .enumerate()
                .map(|(alt, v)| attr_cols_has(spec, &schema.alternatives[alt].name).then_some(v))
                .collect(),
        })
        .collect();
    let indiv_attributes = schema
        .individual_attributes
        .iter()
        .zip(cat_values)
        .map(|(spec, values)| CategoricalAttribute {
            name: spec.name.clone(),
            categories: match &spec.merge {
                Some(m) => m.categories.clone(),
                None => spec.categories.clone(),
            },
            values,
        })
        .collect();
    let data = ChoiceDataset::new(
        schema.alternatives.iter().map(|a| a.name.clone()).collect(),
        availability,
        choice,
        alt_attributes,
        indiv_attributes,
        ids,
    )?;
    if report.total_dropped() > 0 {
        log::info!(
            "{}: kept {} of {} rows ({:?})",
            path.display(),
            data.len(),
            report.rows_read,
            report.dropped
        );
    }
    Ok((data, report))
}

fn attr_cols_has(spec: &AltAttributeSpec, alt: &str) -> bool {
    spec.columns.contains_key(alt)
}

/// Write `data` back in the wide format described by `schema`.
///
/// Merged categoricals are written with their merged labels, so a merged
/// dataset reloads only under a schema without the merge.
pub fn write_dataset(data: &ChoiceDataset, schema: &DatasetSchema, path: impl AsRef<Path>, header_comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(comment) = header_comment {
        for line in comment.lines() {
            writeln!(file, "# {line}").map_err(|e| Error::io(path, e))?;
        }
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![schema.id_column.clone(), schema.choice_column.clone()];
    header.extend(schema.alternatives.iter().filter_map(|a| a.availability.clone()));
    for attr in &schema.alternative_attributes {
        for alt in &schema.alternatives {
            if let Some(c) = attr.columns.get(&alt.name) {
                header.push(c.clone());
            }
        }
    }
    header.extend(schema.individual_attributes.iter().map(|c| c.column.clone()));
    w.write_record(&header)?;

    let j = data.n_alternatives();
    for row in 0..data.len() {
        let mut rec = vec![
            data.individual_id[row].clone(),
            schema.alternatives[data.choice[row]].choice_code.clone(),
        ];
        for (alt, spec) in schema.alternatives.iter().enumerate() {
            if spec.availability.is_some() {
                rec.push(if data.availability[row * j + alt] { "1" } else { "0" }.to_string());
            }
        }
        for attr in &schema.alternative_attributes {
            let values = data
                .alt_attribute(&attr.name)
                .ok_or_else(|| Error::Config(format!("dataset lacks attribute `{}`", attr.name)))?;
            for (alt, spec) in schema.alternatives.iter().enumerate() {
                if attr.columns.contains_key(&spec.name) {
                    let v = values.values[alt].as_ref().map(|c| c[row]).unwrap_or(0.0);
                    rec.push(format!("{v}"));
                }
            }
        }
        for spec in &schema.individual_attributes {
            let cat = data
                .categorical(&spec.name)
                .ok_or_else(|| Error::Config(format!("dataset lacks attribute `{}`", spec.name)))?;
            rec.push(cat.categories[cat.values[row]].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Shuffle observations independently.
    #[default]
    Observation,
    /// Keep all observations of an individual on the same side.
    Individual,
}

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Observation-level partition of `0..n`; identical to [`split_indices`]
/// with [`SplitMode::Observation`] on a dataset of `n` rows.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> Result<SplitIndices> {
    check_fraction(fraction)?;
    let target = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &r in &order[..target] {
        in_train[r] = true;
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| in_train[r]);
    Ok(SplitIndices { train, test })
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("split fraction {fraction} not in (0, 1)")))
    }
}

/// Partition rows `0..data.len()` into train and test sets.
pub fn split_indices(data: &ChoiceDataset, fraction: f64, seed: u64, mode: SplitMode) -> Result<SplitIndices> {
    check_fraction(fraction)?;
    let n = data.len();
    if mode == SplitMode::Observation {
        return split_rows(n, fraction, seed);
    }
    let target = (fraction * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n];
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (r, id) in data.individual_id.iter().enumerate() {
        let g = *index.entry(id).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(r);
    }
    groups.shuffle(&mut rng);
    let mut count = 0;
    for (_, rows) in &groups {
        if count >= target {
            break;
        }
        count += rows.len();
        for &r in rows {
            in_train[r] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| in_train[r]);
    Ok(SplitIndices { train, test })
}

/// Split a dataset into independent train and test datasets.
pub fn split_dataset(data: &ChoiceDataset, fraction: f64, seed: u64, mode: SplitMode) -> Result<(ChoiceDataset, ChoiceDataset)> {
    let idx = split_indices(data, fraction, seed, mode)?;
    if idx.train.is_empty() || idx.test.is_empty() {
        return Err(Error::Argument(format!(
            "split fraction {fraction} leaves an empty side for {} observations",
            data.len()
        )));
    }
    Ok((data.subset(&idx.train)?, data.subset(&idx.test)?))
}
