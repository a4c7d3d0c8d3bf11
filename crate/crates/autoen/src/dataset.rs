//! Classification datasets with mixed feature kinds and missing values, and
//! the stratified partitioning operations built on top of them.
//!
//! Data arrives as a CSV file with a header row plus a sidecar schema file of
//! `key=value` lines declaring the label column, the categorical columns and
//! an optional missing-value sentinel:
//!
//! ```text
//! label=class
//! categorical=buying,maint,safety
//! missing=?
//! classes=unacc,acc,good,vgood
//! ```
//!
//! Class indices follow the declaration order of `classes=` when present,
//! otherwise the lexicographic order of the observed label symbols. Every
//! split operation is stratified and deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema declares a kind for unknown column `{0}`")]
    UnknownColumnKind(String),
    #[error("label column `{0}` not found in header")]
    LabelColumnMissing(String),
    #[error("dataset has fewer than two classes")]
    SingleClassDataset,
    #[error("declared class `{0}` never appears in the data")]
    DeclaredClassAbsent(String),
    #[error("row {row} has {got} fields, expected {expected}")]
    RowLengthMismatch { row: usize, got: usize, expected: usize },
    #[error("non-numeric cell `{cell}` in numeric column `{column}` at row {row}")]
    NonNumericCellInNumericColumn { column: String, row: usize, cell: String },
    #[error("missing label at row {0}")]
    MissingLabel(usize),
    #[error("class {0} has too few members to place one in every part")]
    ClassTooSmall(usize),
    #[error("invalid fractions {0:?}: must be positive and sum to 1")]
    InvalidFractions(Vec<f64>),
    #[error("k={k} is out of range for {n_rows} rows (need 2 <= k <= n_rows)")]
    KTooLarge { k: usize, n_rows: usize },
    #[error("invalid subsample fraction {0}: must be in (0, 1]")]
    InvalidFraction(f64),
    #[error("dataset is empty")]
    Empty,
}

/// Whether a column holds numeric or categorical cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Numeric => write!(f, "numeric"),
            FeatureKind::Categorical => write!(f, "categorical"),
        }
    }
}

/// Cell storage for one feature column. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            ColumnValues::Numeric(_) => FeatureKind::Numeric,
            ColumnValues::Categorical(_) => FeatureKind::Categorical,
        }
    }

    pub fn has_missing(&self) -> bool {
        match self {
            ColumnValues::Numeric(v) => v.iter().any(Option::is_none),
            ColumnValues::Categorical(v) => v.iter().any(Option::is_none),
        }
    }

    fn take(&self, idx: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Numeric(v) => {
                ColumnValues::Numeric(idx.iter().map(|&i| v[i]).collect())
            }
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
}

/// Feature columns without labels. Prediction-time inputs use this directly;
/// [`Dataset`] wraps it together with the label vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Frame {
    pub columns: Vec<Column>,
}

impl Frame {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn take(&self, idx: &[usize]) -> Frame {
        Frame {
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), values: c.values.take(idx) })
                .collect(),
        }
    }
}

/// A column-typed feature table with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    frame: Frame,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Assembles a dataset from parts, checking the type invariants:
    /// consistent column lengths, labels in range, at least two classes and
    /// every class present at least once.
    pub fn new(
        columns: Vec<Column>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let n_rows = labels.len();
        if n_rows == 0 {
            return Err(DatasetError::Empty);
        }
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != n_rows {
                return Err(DatasetError::RowLengthMismatch {
                    row: i,
                    got: c.values.len(),
                    expected: n_rows,
                });
            }
        }
        if class_names.len() < 2 {
            return Err(DatasetError::SingleClassDataset);
        }
        let mut seen = vec![false; class_names.len()];
        for &l in &labels {
            if l >= class_names.len() {
                return Err(DatasetError::Schema(format!(
                    "label index {l} out of range for {} classes",
                    class_names.len()
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(DatasetError::DeclaredClassAbsent(class_names[missing].clone()));
        }
        Ok(Dataset { frame: Frame { columns }, labels, class_names })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.frame.n_columns()
    }

    /// Per-class row counts, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row subset in the given index order. The class space is inherited from
    /// the parent, so a subset may lack some classes.
    pub fn take(&self, idx: &[usize]) -> Dataset {
        Dataset {
            frame: self.frame.take(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Rows of `self` followed by rows of `other`. Column layouts and class
    /// spaces must match.
    pub fn vstack(&self, other: &Dataset) -> Result<Dataset, DatasetError> {
        if self.class_names != other.class_names {
            return Err(DatasetError::Schema("class spaces differ in vstack".into()));
        }
        if self.frame.n_columns() != other.frame.n_columns() {
            return Err(DatasetError::Schema("column counts differ in vstack".into()));
        }
        let columns = self
            .frame
            .columns
            .iter()
            .zip(&other.frame.columns)
            .map(|(a, b)| {
                if a.name != b.name || a.values.kind() != b.values.kind() {
                    return Err(DatasetError::Schema(format!(
                        "column `{}` does not match `{}` in vstack",
                        a.name, b.name
                    )));
                }
                let values = match (&a.values, &b.values) {
                    (ColumnValues::Numeric(x), ColumnValues::Numeric(y)) => {
                        ColumnValues::Numeric(x.iter().chain(y).copied().collect())
                    }
                    (ColumnValues::Categorical(x), ColumnValues::Categorical(y)) => {
                        ColumnValues::Categorical(x.iter().chain(y).cloned().collect())
                    }
                    _ => unreachable!("kinds checked above"),
                };
                Ok(Column { name: a.name.clone(), values })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        Ok(Dataset { frame: Frame { columns }, labels, class_names: self.class_names.clone() })
    }
}

/// Parsed sidecar schema.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    pub label: String,
    pub categorical: Vec<String>,
    pub missing: Option<String>,
    pub classes: Option<Vec<String>>,
}

impl Schema {
    /// Parses `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Schema, DatasetError> {
        let mut schema = Schema::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DatasetError::Schema(format!("line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "label" => schema.label = value.to_string(),
                "categorical" => {
                    schema.categorical = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                }
                "missing" => schema.missing = Some(value.to_string()),
                "classes" => {
                    schema.classes = Some(
                        value
                            .split(',')
                            .map(|s| s.trim().to_string())
                            .filter(|s| !s.is_empty())
                            .collect(),
                    );
                }
                other => {
                    return Err(DatasetError::Schema(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        if schema.label.is_empty() {
            return Err(DatasetError::Schema("schema does not declare label=".into()));
        }
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Schema, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Schema::parse(&text)
    }
}

fn is_missing(cell: &str, sentinel: &Option<String>) -> bool {
    if cell.is_empty() {
        return true;
    }
    matches!(sentinel, Some(s) if cell == s)
}

/// Loads a CSV file against a sidecar schema file.
pub fn load_csv(data_path: &Path, schema_path: &Path) -> Result<Dataset, DatasetError> {
    let schema = Schema::from_file(schema_path)?;
    load_csv_with_schema(data_path, &schema)
}

/// Loads a CSV file against an in-memory schema.
pub fn load_csv_with_schema(path: &Path, schema: &Schema) -> Result<Dataset, DatasetError> {
    let wrap_csv = |source: csv::Error| DatasetError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(wrap_csv)?;
    let header: Vec<String> =
        reader.headers().map_err(wrap_csv)?.iter().map(|s| s.trim().to_string()).collect();

    let label_pos = header
        .iter()
        .position(|h| *h == schema.label)
        .ok_or_else(|| DatasetError::LabelColumnMissing(schema.label.clone()))?;
    for cat in &schema.categorical {
        if !header.contains(cat) {
            return Err(DatasetError::UnknownColumnKind(cat.clone()));
        }
    }

    let feature_cols: Vec<(usize, String, FeatureKind)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_pos)
        .map(|(i, name)| {
            let kind = if schema.categorical.contains(name) {
                FeatureKind::Categorical
            } else {
                FeatureKind::Numeric
            };
            (i, name.clone(), kind)
        })
        .collect();

    let mut columns: Vec<Column> = feature_cols
        .iter()
        .map(|(_, name, kind)| Column {
            name: name.clone(),
            values: match kind {
                FeatureKind::Numeric => ColumnValues::Numeric(Vec::new()),
                FeatureKind::Categorical => ColumnValues::Categorical(Vec::new()),
            },
        })
        .collect();
    let mut raw_labels: Vec<String> = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(wrap_csv)?;
        if record.len() != header.len() {
            return Err(DatasetError::RowLengthMismatch {
                row: row_idx,
                got: record.len(),
                expected: header.len(),
            });
        }
        let label_cell = record.get(label_pos).unwrap_or("").trim();
        if is_missing(label_cell, &schema.missing) {
            return Err(DatasetError::MissingLabel(row_idx));
        }
        raw_labels.push(label_cell.to_string());

        for (slot, (src, name, kind)) in feature_cols.iter().enumerate() {
            let cell = record.get(*src).unwrap_or("").trim();
            let missing = is_missing(cell, &schema.missing);
            match (&mut columns[slot].values, kind) {
                (ColumnValues::Numeric(v), FeatureKind::Numeric) => {
                    if missing {
                        v.push(None);
                    } else {
                        let parsed = cell.parse::<f64>().ok().filter(|x| x.is_finite());
                        match parsed {
                            Some(x) => v.push(Some(x)),
                            None => {
                                return Err(DatasetError::NonNumericCellInNumericColumn {
                                    column: name.clone(),
                                    row: row_idx,
                                    cell: cell.to_string(),
                                })
                            }
                        }
                    }
                }
                (ColumnValues::Categorical(v), FeatureKind::Categorical) => {
                    v.push(if missing { None } else { Some(cell.to_string()) });
                }
                _ => unreachable!("column kind fixed at construction"),
            }
        }
    }

    if raw_labels.is_empty() {
        return Err(DatasetError::Empty);
    }

    // Class indices: schema declaration order wins, otherwise lexicographic.
    let class_names: Vec<String> = match &schema.classes {
        Some(names) => names.clone(),
        None => {
            let mut uniq: Vec<String> = raw_labels.clone();
            uniq.sort();
            uniq.dedup();
            uniq
        }
    };
    if class_names.len() < 2 {
        return Err(DatasetError::SingleClassDataset);
    }
    let index: BTreeMap<&str, usize> =
        class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = raw_labels
        .iter()
        .enumerate()
        .map(|(row, l)| {
            index.get(l.as_str()).copied().ok_or_else(|| {
                DatasetError::Schema(format!("row {row}: label `{l}` not among declared classes"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Dataset::new(columns, labels, class_names)
}

/// Loads a feature-only CSV (no label column required) against a known
/// column layout, as used at prediction time.
pub fn load_frame_csv(
    path: &Path,
    layout: &[(String, FeatureKind)],
    missing: &Option<String>,
) -> Result<Frame, DatasetError> {
    let wrap_csv = |source: csv::Error| DatasetError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(wrap_csv)?;
    let header: Vec<String> =
        reader.headers().map_err(wrap_csv)?.iter().map(|s| s.trim().to_string()).collect();

    let mut positions = Vec::with_capacity(layout.len());
    for (name, _) in layout {
        let pos = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::UnknownColumnKind(name.clone()))?;
        positions.push(pos);
    }

    let mut columns: Vec<Column> = layout
        .iter()
        .map(|(name, kind)| Column {
            name: name.clone(),
            values: match kind {
                FeatureKind::Numeric => ColumnValues::Numeric(Vec::new()),
                FeatureKind::Categorical => ColumnValues::Categorical(Vec::new()),
            },
        })
        .collect();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(wrap_csv)?;
        for (slot, &src) in positions.iter().enumerate() {
            let cell = record.get(src).unwrap_or("").trim();
            let miss = is_missing(cell, missing);
            match &mut columns[slot].values {
                ColumnValues::Numeric(v) => {
                    if miss {
                        v.push(None);
                    } else {
                        let parsed = cell.parse::<f64>().ok().filter(|x| x.is_finite());
                        match parsed {
                            Some(x) => v.push(Some(x)),
                            None => {
                                return Err(DatasetError::NonNumericCellInNumericColumn {
                                    column: layout[slot].0.clone(),
                                    row: row_idx,
                                    cell: cell.to_string(),
                                })
                            }
                        }
                    }
                }
                ColumnValues::Categorical(v) => {
                    v.push(if miss { None } else { Some(cell.to_string()) });
                }
            }
        }
    }
    Ok(Frame { columns })
}

/// Disjoint train/validation/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// K disjoint test-index lists covering the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    /// Classes with fewer members than folds, spread round-robin instead.
    pub warnings: Vec<String>,
}

impl FoldPlan {
    /// All indices outside fold `f`, in ascending order.
    pub fn complement(&self, f: usize, n_rows: usize) -> Vec<usize> {
        let mut in_fold = vec![false; n_rows];
        for &i in &self.folds[f] {
            in_fold[i] = true;
        }
        (0..n_rows).filter(|&i| !in_fold[i]).collect()
    }
}

/// Splits per-class row pools across `fractions.len()` parts by largest
/// remainder, so every part count differs from the exact proportional count
/// by at most one. Pools are shuffled with the seeded RNG first; part
/// membership is then dealt out contiguously.
fn allocate_stratified(
    labels: &[usize],
    n_classes: usize,
    fractions: &[f64],
    seed: u64,
    min_per_part: usize,
) -> Result<Vec<Vec<usize>>, DatasetError> {
    let n_parts = fractions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        pools[l].push(i);
    }

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); n_parts];
    for (class, pool) in pools.iter_mut().enumerate() {
        if pool.is_empty() {
            continue;
        }
        if pool.len() < min_per_part * n_parts {
            return Err(DatasetError::ClassTooSmall(class));
        }
        pool.shuffle(&mut rng);

        let n = pool.len() as f64;
        let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n).floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        // Hand out the leftover units by largest fractional remainder.
        let mut rema: Vec<(usize, f64)> = fractions
            .iter()
            .enumerate()
            .map(|(p, f)| (p, f * n - (f * n).floor()))
            .collect();
        rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for i in 0..(pool.len() - assigned) {
            counts[rema[i % n_parts].0] += 1;
        }
        // Guarantee the minimum per part by moving units from the largest part.
        if min_per_part > 0 {
            loop {
                let Some(short) = counts.iter().position(|&c| c < min_per_part) else {
                    break;
                };
                let donor = counts
                    .iter()
                    .enumerate()
                    .filter(|&(p, &c)| p != short && c > min_per_part)
                    .max_by_key(|&(p, &c)| (c, std::cmp::Reverse(p)))
                    .map(|(p, _)| p)
                    .ok_or(DatasetError::ClassTooSmall(class))?;
                counts[donor] -= 1;
                counts[short] += 1;
            }
        }

        let mut cursor = 0;
        for (p, &c) in counts.iter().enumerate() {
            parts[p].extend_from_slice(&pool[cursor..cursor + c]);
            cursor += c;
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    Ok(parts)
}

/// Stratified train/validation/test split. Deterministic for a fixed seed;
/// every class places at least one row in every part.
pub fn stratified_holdout(
    d: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<HoldoutSplit, DatasetError> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|&f| f <= 0.0) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidFractions(fr.to_vec()));
    }
    let parts = allocate_stratified(d.labels(), d.n_classes(), &fr, seed, 1)?;
    let mut it = parts.into_iter();
    Ok(HoldoutSplit {
        train_idx: it.next().unwrap(),
        valid_idx: it.next().unwrap(),
        test_idx: it.next().unwrap(),
    })
}

/// Stratified two-way split with the given first-part fraction, used for the
/// inner train/validation split of a fold's non-test rows.
pub(crate) fn stratified_two_way(
    labels: &[usize],
    n_classes: usize,
    first_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    let fr = [first_fraction, 1.0 - first_fraction];
    let parts = allocate_stratified(labels, n_classes, &fr, seed, 1)?;
    let mut it = parts.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

/// Stratified k-fold plan. Classes smaller than `k` are spread round-robin
/// and recorded as warnings.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k < 2 || k > d.n_rows() {
        return Err(DatasetError::KTooLarge { k, n_rows: d.n_rows() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        pools[l].push(i);
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut warnings = Vec::new();
    for (class, pool) in pools.iter_mut().enumerate() {
        if pool.len() < k {
            warnings.push(format!(
                "class {} ({}) has {} members, fewer than k={}; spread round-robin",
                class,
                d.class_names()[class],
                pool.len(),
                k
            ));
        }
        pool.shuffle(&mut rng);
        let q = pool.len() / k;
        let r = pool.len() % k;
        // The r spare rows go to the currently smallest folds to keep the
        // overall fold sizes within one of each other.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&f| (folds[f].len(), f));
        let mut counts = vec![q; k];
        for &f in order.iter().take(r) {
            counts[f] += 1;
        }
        let mut cursor = 0;
        for (f, &c) in counts.iter().enumerate() {
            folds[f].extend_from_slice(&pool[cursor..cursor + c]);
            cursor += c;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds, warnings })
}

/// Stratified subsample of `ceil(fraction * n_rows)` rows. With fraction 1.0
/// this is a row-permuted copy.
pub fn subsample(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let target = (fraction * d.n_rows() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        pools[l].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }

    let mut counts: Vec<usize> =
        pools.iter().map(|p| (fraction * p.len() as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // Spare units by largest remainder; ties favour the larger class, then
    // the lower class id.
    let mut rema: Vec<(usize, f64)> = pools
        .iter()
        .enumerate()
        .map(|(c, p)| (c, fraction * p.len() as f64 - (fraction * p.len() as f64).floor()))
        .collect();
    rema.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(pools[b.0].len().cmp(&pools[a.0].len()))
            .then(a.0.cmp(&b.0))
    });
    let mut spare = target - assigned;
    let mut r = 0;
    while spare > 0 {
        let (class, _) = rema[r % rema.len()];
        if counts[class] < pools[class].len() {
            counts[class] += 1;
            spare -= 1;
        }
        r += 1;
    }

    let mut idx = Vec::with_capacity(target);
    for (class, pool) in pools.iter().enumerate() {
        idx.extend_from_slice(&pool[..counts[class]]);
    }
    idx.shuffle(&mut rng);
    Ok(d.take(&idx))
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_labels() -> impl Strategy<Value = Vec<usize>> {
        (2usize..4, 1usize..30).prop_flat_map(|(classes, extra)| {
            proptest::collection::vec(0..classes, classes * 9 + extra).prop_map(move |mut v| {
                // Force every class to appear at least 9 times so three-way
                // splits always have room.
                for c in 0..classes {
                    for slot in 0..9 {
                        v[c * 9 + slot] = c;
                    }
                }
                v
            })
        })
    }

    fn dataset_from_labels(labels: Vec<usize>) -> Dataset {
        let classes = labels.iter().max().unwrap() + 1;
        let col = Column {
            name: "x".into(),
            values: ColumnValues::Numeric((0..labels.len()).map(|i| Some(i as f64)).collect()),
        };
        Dataset::new(vec![col], labels, (0..classes).map(|c| format!("c{c}")).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn holdout_partitions_and_stratifies(labels in arb_labels(), seed in 0u64..50) {
            let d = dataset_from_labels(labels);
            let s = stratified_holdout(&d, (0.6, 0.2, 0.2), seed).unwrap();
            let mut all: Vec<usize> = s.train_idx.iter()
                .chain(&s.valid_idx)
                .chain(&s.test_idx)
                .copied()
                .collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d.n_rows()).collect::<Vec<_>>());

            let class_counts = d.class_counts();
            for (frac, part) in [(0.6, &s.train_idx), (0.2, &s.valid_idx), (0.2, &s.test_idx)] {
                let mut got = vec![0usize; d.n_classes()];
                for &i in part {
                    got[d.labels()[i]] += 1;
                }
                for c in 0..d.n_classes() {
                    let exact = frac * class_counts[c] as f64;
                    prop_assert!((got[c] as f64 - exact.round()).abs() <= 1.0,
                        "class {} part count {} vs exact {}", c, got[c], exact);
                }
            }
        }

        #[test]
        fn kfold_partitions_and_stratifies(labels in arb_labels(), seed in 0u64..50, k in 2usize..6) {
            let d = dataset_from_labels(labels);
            let plan = stratified_kfold(&d, k, seed).unwrap();
            let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d.n_rows()).collect::<Vec<_>>());

            let class_counts = d.class_counts();
            for fold in &plan.folds {
                let mut got = vec![0usize; d.n_classes()];
                for &i in fold {
                    got[d.labels()[i]] += 1;
                }
                for c in 0..d.n_classes() {
                    let exact = class_counts[c] as f64 / k as f64;
                    prop_assert!((got[c] as f64 - exact.round()).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn subsample_deviation_at_most_one(labels in arb_labels(), seed in 0u64..50, pct in 1u32..100) {
            let d = dataset_from_labels(labels);
            let fraction = pct as f64 / 100.0;
            let s = subsample(&d, fraction, seed).unwrap();
            prop_assert_eq!(s.n_rows(), (fraction * d.n_rows() as f64).ceil() as usize);
            let counts = s.class_counts();
            for (c, &n_c) in d.class_counts().iter().enumerate() {
                let exact = fraction * n_c as f64;
                prop_assert!((counts[c] as f64 - exact.round()).abs() <= 1.0);
            }
        }
    }
}
