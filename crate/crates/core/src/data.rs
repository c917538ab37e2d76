//! Dataset model, CSV ingestion and preprocessing.
//!
//! A [`Dataset`] holds the feature matrix, the target and the confound
//! matrix together with per-column metadata. All preprocessing steps that
//! learn statistics ([`Standardizer`]) are fitted on an explicit row set so
//! the cross-validation harness can keep them on training rows only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::warn;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Classification,
    Regression,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    RejectFile,
    DropRows,
}

/// Name, kind and (for categorical columns) the level labels in code order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl ColumnInfo {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            levels: None,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Continuous)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Binary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub feature_columns: Vec<ColumnInfo>,
    /// 0/1 codes for classification, raw values for regression.
    pub target: Array1<f64>,
    pub target_name: String,
    pub target_kind: TargetKind,
    /// Original labels for codes 0 and 1 (classification only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<[String; 2]>,
    pub confounds: Array2<f64>,
    pub confound_columns: Vec<ColumnInfo>,
    /// Optional grouping used to stratify folds and splits. Refines the
    /// class stratification when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<u32>>,
}

impl Dataset {
    /// Builds a dataset and checks the structural invariants.
    pub fn new(
        features: Array2<f64>,
        feature_columns: Vec<ColumnInfo>,
        target: Array1<f64>,
        target_name: impl Into<String>,
        target_kind: TargetKind,
        confounds: Array2<f64>,
        confound_columns: Vec<ColumnInfo>,
    ) -> Result<Self> {
        let d = Self {
            features,
            feature_columns,
            target,
            target_name: target_name.into(),
            target_kind,
            class_labels: None,
            confounds,
            confound_columns,
            strata: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_class_labels(mut self, labels: [String; 2]) -> Self {
        self.class_labels = Some(labels);
        self
    }

    pub fn with_strata(mut self, strata: Vec<u32>) -> Result<Self> {
        if strata.len() != self.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} strata labels for {} rows",
                strata.len(),
                self.n_rows()
            )));
        }
        self.strata = Some(strata);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.target.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("dataset needs at least 2 rows, got {n}")));
        }
        if self.features.nrows() != n || self.confounds.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "row counts differ: features {}, target {n}, confounds {}",
                self.features.nrows(),
                self.confounds.nrows()
            )));
        }
        if self.features.ncols() == 0 {
            return Err(Error::InvalidInput("dataset needs at least one feature".into()));
        }
        if self.features.ncols() != self.feature_columns.len()
            || self.confounds.ncols() != self.confound_columns.len()
        {
            return Err(Error::DimensionMismatch(
                "column metadata does not match matrix width".into(),
            ));
        }
        if let Some(s) = &self.strata {
            if s.len() != n {
                return Err(Error::DimensionMismatch("strata length".into()));
            }
        }
        if self.features.iter().chain(self.confounds.iter()).chain(self.target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset contains NaN or infinite values".into()));
        }
        if self.target_kind == TargetKind::Classification {
            let mut seen = [false; 2];
            for &v in self.target.iter() {
                if v == 0.0 {
                    seen[0] = true;
                } else if v == 1.0 {
                    seen[1] = true;
                } else {
                    return Err(Error::InvalidTarget(format!(
                        "classification target must be coded 0/1, found {v}"
                    )));
                }
            }
            if !(seen[0] && seen[1]) {
                return Err(Error::InvalidTarget(
                    "classification target needs exactly 2 classes".into(),
                ));
            }
        }
        for (j, col) in self.feature_columns.iter().enumerate() {
            if col.kind == ColumnKind::Categorical
                && self.features.column(j).iter().any(|&v| v < 0.0 || v.fract() != 0.0)
            {
                return Err(Error::InvalidInput(format!(
                    "categorical column `{}` must hold non-negative integer codes",
                    col.name
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_confounds(&self) -> usize {
        self.confounds.ncols()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.feature_columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn confound_names(&self) -> Vec<&str> {
        self.confound_columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn is_classification(&self) -> bool {
        self.target_kind == TargetKind::Classification
    }

    /// Class counts `[n0, n1]` for classification targets.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.target.iter().filter(|&&v| v == 1.0).count();
        [self.n_rows() - ones, ones]
    }

    /// Rows in the given order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            feature_columns: self.feature_columns.clone(),
            target: self.target.select(Axis(0), rows),
            target_name: self.target_name.clone(),
            target_kind: self.target_kind,
            class_labels: self.class_labels.clone(),
            confounds: self.confounds.select(Axis(0), rows),
            confound_columns: self.confound_columns.clone(),
            strata: self.strata.as_ref().map(|s| rows.iter().map(|&r| s[r]).collect()),
        }
    }

    /// Same rows, new feature matrix.
    pub fn with_features(&self, features: Array2<f64>, columns: Vec<ColumnInfo>) -> Dataset {
        Dataset {
            features,
            feature_columns: columns,
            ..self.clone()
        }
    }

    /// Same rows, new confound matrix.
    pub fn with_confounds(&self, confounds: Array2<f64>, columns: Vec<ColumnInfo>) -> Dataset {
        Dataset {
            confounds,
            confound_columns: columns,
            ..self.clone()
        }
    }

    /// Stratification key per row: class (classification) combined with the
    /// optional strata column. `None` when no stratification applies.
    pub fn stratification_keys(&self) -> Option<Vec<u64>> {
        let class = self.is_classification();
        match (&self.strata, class) {
            (None, false) => None,
            (None, true) => Some(self.target.iter().map(|&v| v as u64).collect()),
            (Some(s), _) => Some(
                s.iter()
                    .zip(self.target.iter())
                    .map(|(&g, &y)| if class { (g as u64) << 1 | y as u64 } else { g as u64 })
                    .collect(),
            ),
        }
    }

    /// Content hash over every value and name, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in self.feature_columns.iter().chain(&self.confound_columns) {
            h.update(c.name.as_bytes());
            h.update([0u8]);
        }
        h.update(self.target_name.as_bytes());
        for v in self.features.iter().chain(self.confounds.iter()).chain(self.target.iter()) {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub target: String,
    pub confounds: Vec<String>,
    /// Columns read as fold-stratification groups; excluded from features.
    pub strata: Option<String>,
    /// Columns dropped entirely.
    pub ignore: Vec<String>,
    pub kind_overrides: HashMap<String, ColumnKind>,
    pub missing_policy: MissingPolicy,
}

impl CsvOptions {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            confounds: Vec::new(),
            strata: None,
            ignore: Vec::new(),
            kind_overrides: HashMap::new(),
            missing_policy: MissingPolicy::RejectFile,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A column decoded to numbers plus the metadata to go with it.
struct Decoded {
    values: Vec<f64>,
    info: ColumnInfo,
}

/// Infers the column kind. A column is categorical when most of its cells
/// are non-numeric; the remaining non-numeric cells of a numeric column are
/// ingestion errors.
fn infer_kind(cells: &[&str]) -> ColumnKind {
    let numeric = cells.iter().filter(|c| parse_number(c).is_some()).count();
    if numeric * 2 < cells.len() {
        return ColumnKind::Categorical;
    }
    let distinct: BTreeSet<u64> = cells.iter().filter_map(|c| parse_number(c)).map(f64::to_bits).collect();
    if distinct.len() <= 2 {
        ColumnKind::Binary
    } else {
        ColumnKind::Continuous
    }
}

/// Stable level order: numeric order when every label parses as a number,
/// lexicographic otherwise.
fn level_order(cells: &[&str]) -> Vec<String> {
    let distinct: BTreeSet<String> = cells.iter().map(|c| c.trim().to_string()).collect();
    let mut levels: Vec<String> = distinct.into_iter().collect();
    if levels.iter().all(|l| parse_number(l).is_some()) {
        levels.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
    }
    levels
}

fn decode_column(name: &str, cells: &[&str], kind: ColumnKind, row_ids: &[usize]) -> Result<Decoded> {
    match kind {
        ColumnKind::Categorical => {
            let levels = level_order(cells);
            let index: HashMap<&str, usize> =
                levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            let values = cells.iter().map(|c| index[c.trim()] as f64).collect();
            Ok(Decoded {
                values,
                info: ColumnInfo {
                    name: name.to_string(),
                    kind,
                    levels: Some(levels),
                },
            })
        }
        _ => {
            let mut values = Vec::with_capacity(cells.len());
            for (cell, &row) in cells.iter().zip(row_ids) {
                match parse_number(cell) {
                    Some(v) => values.push(v),
                    None => {
                        return Err(Error::Ingestion {
                            row,
                            column: name.to_string(),
                            message: format!("cannot parse `{cell}` as a number"),
                        })
                    }
                }
            }
            Ok(Decoded {
                values,
                info: ColumnInfo::new(name, kind),
            })
        }
    }
}

fn columns_to_matrix(n: usize, cols: &[Decoded]) -> Array2<f64> {
    let mut m = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.values.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}

/// Reads a CSV file with a mandatory header row.
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target_idx = position(&opts.target)?;
    let confound_idx: Vec<usize> = opts.confounds.iter().map(|c| position(c)).collect::<Result<_>>()?;
    let strata_idx = opts.strata.as_deref().map(position).transpose()?;
    let ignore_idx: Vec<usize> = opts.ignore.iter().map(|c| position(c)).collect::<Result<_>>()?;
    for name in opts.kind_overrides.keys() {
        position(name)?;
    }

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }

    // Missing-value handling.
    let mut keep: Vec<usize> = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let missing = (0..header.len()).find(|&j| is_missing(rec.get(j).unwrap_or("")));
        match (missing, opts.missing_policy) {
            (None, _) => keep.push(i),
            (Some(j), MissingPolicy::RejectFile) => {
                return Err(Error::Ingestion {
                    row: i + 1,
                    column: header[j].clone(),
                    message: "missing value".into(),
                })
            }
            (Some(_), MissingPolicy::DropRows) => {}
        }
    }
    if keep.len() < records.len() {
        warn!("dropped {} rows with missing values", records.len() - keep.len());
    }
    let row_ids: Vec<usize> = keep.iter().map(|&i| i + 1).collect();
    let cells_of = |j: usize| -> Vec<&str> { keep.iter().map(|&i| records[i].get(j).unwrap_or("")).collect() };
    let kind_of = |j: usize, cells: &[&str]| -> ColumnKind {
        opts.kind_overrides.get(&header[j]).copied().unwrap_or_else(|| infer_kind(cells))
    };

    // Under drop_rows, unparseable numeric cells drop the row too.
    let mut bad_rows: BTreeSet<usize> = BTreeSet::new();
    if opts.missing_policy == MissingPolicy::DropRows {
        for j in 0..header.len() {
            if Some(j) == strata_idx || ignore_idx.contains(&j) {
                continue;
            }
            let cells = cells_of(j);
            if kind_of(j, &cells) != ColumnKind::Categorical {
                for (k, c) in cells.iter().enumerate() {
                    if parse_number(c).is_none() {
                        bad_rows.insert(k);
                    }
                }
            }
        }
        if !bad_rows.is_empty() {
            warn!("dropped {} rows with unparseable numeric cells", bad_rows.len());
        }
    }
    let kept: Vec<usize> = (0..keep.len()).filter(|k| !bad_rows.contains(k)).collect();
    let row_ids: Vec<usize> = kept.iter().map(|&k| row_ids[k]).collect();
    let cells_of = |j: usize| -> Vec<&str> {
        let all = cells_of(j);
        kept.iter().map(|&k| all[k]).collect()
    };
    let n = kept.len();

    // Target.
    let target_cells = cells_of(target_idx);
    let target_kind_col = kind_of(target_idx, &target_cells);
    let (target, target_kind, class_labels) = match target_kind_col {
        ColumnKind::Continuous => {
            let d = decode_column(&opts.target, &target_cells, ColumnKind::Continuous, &row_ids)?;
            (Array1::from(d.values), TargetKind::Regression, None)
        }
        _ => {
            let levels = level_order(&target_cells);
            if levels.len() != 2 {
                return Err(Error::InvalidTarget(format!(
                    "classification target `{}` has {} distinct classes, expected 2",
                    opts.target,
                    levels.len()
                )));
            }
            let coded = target_cells
                .iter()
                .map(|c| if c.trim() == levels[0] { 0.0 } else { 1.0 })
                .collect::<Vec<_>>();
            (
                Array1::from(coded),
                TargetKind::Classification,
                Some([levels[0].clone(), levels[1].clone()]),
            )
        }
    };

    let mut feature_cols = Vec::new();
    let mut confound_cols = Vec::new();
    for name in &opts.confounds {
        let j = position(name)?;
        let cells = cells_of(j);
        confound_cols.push(decode_column(name, &cells, kind_of(j, &cells), &row_ids)?);
    }
    for (j, name) in header.iter().enumerate() {
        if j == target_idx || confound_idx.contains(&j) || Some(j) == strata_idx || ignore_idx.contains(&j) {
            continue;
        }
        let cells = cells_of(j);
        feature_cols.push(decode_column(name, &cells, kind_of(j, &cells), &row_ids)?);
    }

    let features = columns_to_matrix(n, &feature_cols);
    let confounds = columns_to_matrix(n, &confound_cols);
    let mut d = Dataset::new(
        features,
        feature_cols.into_iter().map(|c| c.info).collect(),
        target,
        opts.target.clone(),
        target_kind,
        confounds,
        confound_cols.into_iter().map(|c| c.info).collect(),
    )?;
    d.class_labels = class_labels;
    if let Some(j) = strata_idx {
        let cells = cells_of(j);
        let levels = level_order(&cells);
        let index: HashMap<&str, u32> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        d = d.with_strata(cells.iter().map(|c| index[c.trim()]).collect())?;
    }
    Ok(d)
}

/// Writes a dataset as CSV: features, confounds, target, then the optional
/// strata column. Categorical columns are written with their level labels.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_to(d, std::io::BufWriter::new(file))
}

/// [`write_csv`] into any writer.
pub fn write_csv_to<W: std::io::Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = d.feature_columns.iter().map(|c| c.name.clone()).collect();
    header.extend(d.confound_columns.iter().map(|c| c.name.clone()));
    header.push(d.target_name.clone());
    if d.strata.is_some() {
        header.push("stratum".into());
    }
    w.write_record(&header)?;
    let cell = |col: &ColumnInfo, v: f64| -> String {
        match &col.levels {
            Some(levels) => levels[v as usize].clone(),
            None => format_number(v),
        }
    };
    for i in 0..d.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for (j, col) in d.feature_columns.iter().enumerate() {
            rec.push(cell(col, d.features[[i, j]]));
        }
        for (j, col) in d.confound_columns.iter().enumerate() {
            rec.push(cell(col, d.confounds[[i, j]]));
        }
        rec.push(match &d.class_labels {
            Some(l) => l[d.target[i] as usize].clone(),
            None => format_number(d.target[i]),
        });
        if let Some(s) = &d.strata {
            rec.push(s[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same f64.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

// ---------------------------------------------------------------------------
// One-hot encoding
// ---------------------------------------------------------------------------

fn encode_block(m: &Array2<f64>, cols: &[ColumnInfo]) -> (Array2<f64>, Vec<ColumnInfo>) {
    if cols.iter().all(|c| c.kind != ColumnKind::Categorical) {
        return (m.clone(), cols.to_vec());
    }
    let mut out_cols: Vec<Vec<f64>> = Vec::new();
    let mut out_info = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let column = m.column(j);
        if col.kind != ColumnKind::Categorical {
            out_cols.push(column.to_vec());
            out_info.push(col.clone());
            continue;
        }
        let levels: Vec<String> = match &col.levels {
            Some(l) => l.clone(),
            None => {
                let max = column.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
                (0..=max).map(|k| k.to_string()).collect()
            }
        };
        if levels.len() == 1 {
            warn!("categorical column `{}` has a single level; its indicator is constant", col.name);
        }
        for (k, level) in levels.iter().enumerate() {
            out_cols.push(column.iter().map(|&v| if v as usize == k { 1.0 } else { 0.0 }).collect());
            out_info.push(ColumnInfo::binary(format!("{}={}", col.name, level)));
        }
    }
    let n = m.nrows();
    let mut out = Array2::zeros((n, out_cols.len()));
    for (j, c) in out_cols.iter().enumerate() {
        for i in 0..n {
            out[[i, j]] = c[i];
        }
    }
    (out, out_info)
}

/// Full one-hot encoding (no dropped level) of every categorical feature
/// and confound column.
pub fn one_hot_encode(d: &Dataset) -> Dataset {
    let (features, feature_columns) = encode_block(&d.features, &d.feature_columns);
    let (confounds, confound_columns) = encode_block(&d.confounds, &d.confound_columns);
    Dataset {
        features,
        feature_columns,
        confounds,
        confound_columns,
        ..d.clone()
    }
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub column: usize,
    pub mean: f64,
    pub scale: f64,
}

/// Per-column mean and (population) standard deviation of the continuous
/// feature and confound columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub features: Vec<ColumnScaling>,
    pub confounds: Vec<ColumnScaling>,
}

fn fit_block(m: &Array2<f64>, cols: &[ColumnInfo], rows: &[usize], what: &str) -> Vec<ColumnScaling> {
    let n = rows.len() as f64;
    cols.iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Continuous)
        .map(|(j, c)| {
            let mean = rows.iter().map(|&i| m[[i, j]]).sum::<f64>() / n;
            let var = rows.iter().map(|&i| (m[[i, j]] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let scale = if sd > 1e-12 * (1.0 + mean.abs()) {
                sd
            } else {
                warn!("{what} column `{}` has zero variance on the fitting rows; centering only", c.name);
                1.0
            };
            ColumnScaling { column: j, mean, scale }
        })
        .collect()
}

fn apply_block(m: &mut Array2<f64>, scalings: &[ColumnScaling]) {
    for s in scalings {
        m.column_mut(s.column).mapv_inplace(|v| (v - s.mean) / s.scale);
    }
}

pub fn fit_standardizer(d: &Dataset, rows: &[usize]) -> Result<Standardizer> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("standardizer needs a nonempty row set".into()));
    }
    Ok(Standardizer {
        features: fit_block(&d.features, &d.feature_columns, rows, "feature"),
        confounds: fit_block(&d.confounds, &d.confound_columns, rows, "confound"),
    })
}

pub fn apply_standardizer(s: &Standardizer, d: &Dataset) -> Dataset {
    let mut out = d.clone();
    apply_block(&mut out.features, &s.features);
    apply_block(&mut out.confounds, &s.confounds);
    out
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Undersamples the majority class without replacement. Retained rows keep
/// their original order.
pub fn balance_classes(d: &Dataset, seed: u64) -> Result<Dataset> {
    if !d.is_classification() {
        return Err(Error::InvalidTarget("class balancing needs a classification target".into()));
    }
    let [n0, n1] = d.class_counts();
    if n0 == n1 {
        return Ok(d.clone());
    }
    let majority = if n0 > n1 { 0.0 } else { 1.0 };
    let minority_count = n0.min(n1);
    let mut majority_rows: Vec<usize> = (0..d.n_rows()).filter(|&i| d.target[i] == majority).collect();
    let mut rng = rng::derived_rng(seed, &[stream::BALANCE]);
    majority_rows.shuffle(&mut rng);
    majority_rows.truncate(minority_count);
    let mut keep: Vec<usize> = (0..d.n_rows()).filter(|&i| d.target[i] != majority).collect();
    keep.extend(majority_rows);
    keep.sort_unstable();
    Ok(d.select_rows(&keep))
}

/// Number of test rows: round(n * fraction), halves rounded up.
pub fn test_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 0.5).floor() as usize
}

/// Row indices of a random train/test partition, both sorted ascending.
///
/// With `keys` the per-group test counts follow largest-remainder
/// allocation of the overall test size, so group proportions are kept to
/// rounding.
pub fn split_indices(
    n: usize,
    keys: Option<&[u64]>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let total_test = test_size(n, test_fraction);
    if total_test == 0 || total_test >= n {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} leaves an empty part for {n} rows"
        )));
    }
    let mut rng = rng::derived_rng(seed, &[stream::SPLIT]);
    let mut test = Vec::with_capacity(total_test);
    match keys {
        None => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            test.extend_from_slice(&rows[..total_test]);
        }
        Some(keys) => {
            let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, &k) in keys.iter().enumerate() {
                groups.entry(k).or_default().push(i);
            }
            let exact: Vec<f64> = groups.values().map(|g| g.len() as f64 * test_fraction).collect();
            let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
            let mut remaining = total_test.saturating_sub(counts.iter().sum());
            let mut order: Vec<usize> = (0..counts.len()).collect();
            order.sort_by(|&a, &b| {
                let fa = exact[a] - exact[a].floor();
                let fb = exact[b] - exact[b].floor();
                fb.total_cmp(&fa).then(a.cmp(&b))
            });
            for &g in order.iter().cycle().take(order.len() * 2) {
                if remaining == 0 {
                    break;
                }
                let size = groups.values().nth(g).map(Vec::len).unwrap_or(0);
                if counts[g] < size {
                    counts[g] += 1;
                    remaining -= 1;
                }
            }
            for ((key, rows), &c) in groups.iter_mut().zip(&counts) {
                if c >= rows.len() {
                    return Err(Error::InvalidInput(format!(
                        "stratified split leaves stratum {key} empty in the training part"
                    )));
                }
                rows.shuffle(&mut rng);
                test.extend_from_slice(&rows[..c]);
            }
        }
    }
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

pub fn train_test_split(d: &Dataset, test_fraction: f64, seed: u64, stratify: bool) -> Result<(Dataset, Dataset)> {
    let keys = if stratify { d.stratification_keys() } else { None };
    let (train, test) = split_indices(d.n_rows(), keys.as_deref(), test_fraction, seed)?;
    Ok((d.select_rows(&train), d.select_rows(&test)))
}

/// Independently permutes every feature column. Target and confounds are
/// left alone.
pub fn shuffle_features(d: &Dataset, seed: u64) -> Dataset {
    let mut out = d.clone();
    let n = d.n_rows();
    for j in 0..d.n_features() {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::derived_rng(seed, &[stream::SHUFFLE, j as u64]));
        let col = d.features.column(j);
        for (i, &p) in perm.iter().enumerate() {
            out.features[[i, j]] = col[p];
        }
    }
    out
}
