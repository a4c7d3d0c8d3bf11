//! Fitted, replayable preprocessing steps mapping a mixed-type dataset to an
//! all-numeric feature matrix.
//!
//! A chain is fitted on training data only and then replayed on any data with
//! the same column layout. Steps that only understand numeric, missing-free
//! input (scalers, the variance filter, polynomial expansion) reject chains
//! where categorical columns or missing values survive to their position;
//! the same check guards the final conversion to a matrix, so an empty chain
//! is only valid on already-numeric, complete data.
//!
//! Conventions fixed here: imputation is mean (numeric) / mode (categorical,
//! ties to the lexicographically smallest symbol); one-hot vocabularies are
//! the sorted distinct fit-time symbols and unseen or missing symbols map to
//! an all-zeros block; constant columns scale to zero.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnValues, Dataset, FeatureKind, Frame};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("chain order invalid at {step}: {reason}")]
    ChainOrderInvalid { step: String, reason: String },
    #[error("variance filter removed every column")]
    EmptyOutput,
    #[error("arity mismatch: transform expects {expected} columns, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("column `{0}` missing from input")]
    UnknownColumn(String),
    #[error("column `{column}` is {got}, expected {expected}")]
    KindMismatch { column: String, expected: FeatureKind, got: FeatureKind },
}

/// A preprocessing step kind with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformKind {
    ImputeMeanMode,
    StandardScale,
    MinMaxScale,
    OneHotEncode,
    VarianceFilter(f64),
    /// Degree-2 polynomial expansion: originals plus all pairwise products.
    PolynomialExpand,
}

impl TransformKind {
    /// Parses the portfolio-file spelling of a step.
    pub fn parse(text: &str) -> Option<TransformKind> {
        let text = text.trim();
        match text {
            "impute" => Some(TransformKind::ImputeMeanMode),
            "standard_scale" => Some(TransformKind::StandardScale),
            "minmax_scale" => Some(TransformKind::MinMaxScale),
            "onehot" => Some(TransformKind::OneHotEncode),
            "poly2" => Some(TransformKind::PolynomialExpand),
            _ => {
                let inner = text.strip_prefix("variance_filter(")?.strip_suffix(')')?;
                let threshold: f64 = inner.trim().parse().ok()?;
                (threshold >= 0.0).then_some(TransformKind::VarianceFilter(threshold))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TransformKind::ImputeMeanMode => "impute".into(),
            TransformKind::StandardScale => "standard_scale".into(),
            TransformKind::MinMaxScale => "minmax_scale".into(),
            TransformKind::OneHotEncode => "onehot".into(),
            TransformKind::VarianceFilter(t) => format!("variance_filter({t})"),
            TransformKind::PolynomialExpand => "poly2".into(),
        }
    }
}

/// Working column during chain execution.
#[derive(Debug, Clone, PartialEq)]
enum WorkCol {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl WorkCol {
    fn from_values(values: &ColumnValues) -> WorkCol {
        match values {
            ColumnValues::Numeric(v) => WorkCol::Numeric(v.clone()),
            ColumnValues::Categorical(v) => WorkCol::Categorical(v.clone()),
        }
    }
}

fn numeric_complete(cols: &[WorkCol], step: &TransformKind) -> Result<Vec<Vec<f64>>, PreprocessError> {
    let mut out = Vec::with_capacity(cols.len());
    for (i, col) in cols.iter().enumerate() {
        match col {
            WorkCol::Categorical(_) => {
                return Err(PreprocessError::ChainOrderInvalid {
                    step: step.name(),
                    reason: format!("column {i} is still categorical (missing a onehot step?)"),
                })
            }
            WorkCol::Numeric(v) => {
                if v.iter().any(Option::is_none) {
                    return Err(PreprocessError::ChainOrderInvalid {
                        step: step.name(),
                        reason: format!("column {i} still has missing values (missing an impute step?)"),
                    });
                }
                out.push(v.iter().map(|x| x.unwrap()).collect());
            }
        }
    }
    Ok(out)
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Kind-specific learned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TransformState {
    Impute { numeric_fill: Vec<Option<f64>>, categorical_fill: Vec<Option<String>> },
    Scale { mean_std: Vec<(f64, f64)> },
    MinMax { min_max: Vec<(f64, f64)> },
    OneHot { vocabs: Vec<Option<Vec<String>>> },
    Keep { mask: Vec<bool> },
    Poly,
}

/// One fitted preprocessing step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub kind: TransformKind,
    state: TransformState,
    pub input_arity: usize,
    pub output_arity: usize,
}

impl FittedTransform {
    fn fit(kind: &TransformKind, cols: &[WorkCol]) -> Result<FittedTransform, PreprocessError> {
        let input_arity = cols.len();
        match kind {
            TransformKind::ImputeMeanMode => {
                let mut numeric_fill = vec![None; input_arity];
                let mut categorical_fill = vec![None; input_arity];
                for (i, col) in cols.iter().enumerate() {
                    match col {
                        WorkCol::Numeric(v) => {
                            let present: Vec<f64> = v.iter().flatten().copied().collect();
                            let mean = if present.is_empty() {
                                0.0
                            } else {
                                present.iter().sum::<f64>() / present.len() as f64
                            };
                            numeric_fill[i] = Some(mean);
                        }
                        WorkCol::Categorical(v) => {
                            let mut counts: std::collections::BTreeMap<&str, usize> =
                                std::collections::BTreeMap::new();
                            for s in v.iter().flatten() {
                                *counts.entry(s.as_str()).or_default() += 1;
                            }
                            // BTreeMap iteration is sorted, so the first max
                            // is the lexicographically smallest mode.
                            let mode = counts
                                .iter()
                                .max_by_key(|(_, &c)| c)
                                .map(|(s, _)| s.to_string())
                                .unwrap_or_default();
                            categorical_fill[i] = Some(mode);
                        }
                    }
                }
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::Impute { numeric_fill, categorical_fill },
                    input_arity,
                    output_arity: input_arity,
                })
            }
            TransformKind::StandardScale => {
                let numeric = numeric_complete(cols, kind)?;
                let mean_std = numeric
                    .iter()
                    .map(|v| {
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        (mean, sample_variance(v).sqrt())
                    })
                    .collect();
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::Scale { mean_std },
                    input_arity,
                    output_arity: input_arity,
                })
            }
            TransformKind::MinMaxScale => {
                let numeric = numeric_complete(cols, kind)?;
                let min_max = numeric
                    .iter()
                    .map(|v| {
                        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        (min, max)
                    })
                    .collect();
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::MinMax { min_max },
                    input_arity,
                    output_arity: input_arity,
                })
            }
            TransformKind::OneHotEncode => {
                let mut vocabs = vec![None; input_arity];
                let mut output_arity = 0;
                for (i, col) in cols.iter().enumerate() {
                    match col {
                        WorkCol::Numeric(_) => output_arity += 1,
                        WorkCol::Categorical(v) => {
                            let mut vocab: Vec<String> =
                                v.iter().flatten().cloned().collect();
                            vocab.sort();
                            vocab.dedup();
                            output_arity += vocab.len();
                            vocabs[i] = Some(vocab);
                        }
                    }
                }
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::OneHot { vocabs },
                    input_arity,
                    output_arity,
                })
            }
            TransformKind::VarianceFilter(threshold) => {
                let numeric = numeric_complete(cols, kind)?;
                let mask: Vec<bool> =
                    numeric.iter().map(|v| sample_variance(v) > *threshold).collect();
                let kept = mask.iter().filter(|&&m| m).count();
                if kept == 0 {
                    return Err(PreprocessError::EmptyOutput);
                }
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::Keep { mask },
                    input_arity,
                    output_arity: kept,
                })
            }
            TransformKind::PolynomialExpand => {
                numeric_complete(cols, kind)?;
                Ok(FittedTransform {
                    kind: kind.clone(),
                    state: TransformState::Poly,
                    input_arity,
                    output_arity: input_arity + input_arity * (input_arity + 1) / 2,
                })
            }
        }
    }

    fn apply(&self, cols: Vec<WorkCol>) -> Result<Vec<WorkCol>, PreprocessError> {
        if cols.len() != self.input_arity {
            return Err(PreprocessError::ArityMismatch {
                expected: self.input_arity,
                got: cols.len(),
            });
        }
        match &self.state {
            TransformState::Impute { numeric_fill, categorical_fill } => Ok(cols
                .into_iter()
                .enumerate()
                .map(|(i, col)| match col {
                    WorkCol::Numeric(v) => {
                        let fill = numeric_fill[i].unwrap_or(0.0);
                        WorkCol::Numeric(v.into_iter().map(|x| Some(x.unwrap_or(fill))).collect())
                    }
                    WorkCol::Categorical(v) => {
                        let fill = categorical_fill[i].clone().unwrap_or_default();
                        WorkCol::Categorical(
                            v.into_iter().map(|x| Some(x.unwrap_or_else(|| fill.clone()))).collect(),
                        )
                    }
                })
                .collect()),
            TransformState::Scale { mean_std } => {
                let numeric = numeric_complete(&cols, &self.kind)?;
                Ok(numeric
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let (mean, std) = mean_std[i];
                        WorkCol::Numeric(
                            v.into_iter()
                                .map(|x| Some(if std > 0.0 { (x - mean) / std } else { 0.0 }))
                                .collect(),
                        )
                    })
                    .collect())
            }
            TransformState::MinMax { min_max } => {
                let numeric = numeric_complete(&cols, &self.kind)?;
                Ok(numeric
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let (min, max) = min_max[i];
                        let range = max - min;
                        WorkCol::Numeric(
                            v.into_iter()
                                .map(|x| Some(if range > 0.0 { (x - min) / range } else { 0.0 }))
                                .collect(),
                        )
                    })
                    .collect())
            }
            TransformState::OneHot { vocabs } => {
                let n_rows = match cols.first() {
                    Some(WorkCol::Numeric(v)) => v.len(),
                    Some(WorkCol::Categorical(v)) => v.len(),
                    None => 0,
                };
                let mut out = Vec::with_capacity(self.output_arity);
                for (i, col) in cols.into_iter().enumerate() {
                    match (col, &vocabs[i]) {
                        (col @ WorkCol::Numeric(_), None) => out.push(col),
                        (WorkCol::Categorical(v), Some(vocab)) => {
                            let mut block: Vec<Vec<Option<f64>>> =
                                vec![vec![Some(0.0); n_rows]; vocab.len()];
                            for (row, cell) in v.iter().enumerate() {
                                if let Some(symbol) = cell {
                                    if let Ok(slot) = vocab.binary_search(symbol) {
                                        block[slot][row] = Some(1.0);
                                    }
                                    // Unseen symbols leave the all-zeros block.
                                }
                            }
                            out.extend(block.into_iter().map(WorkCol::Numeric));
                        }
                        _ => {
                            return Err(PreprocessError::ArityMismatch {
                                expected: self.input_arity,
                                got: i,
                            })
                        }
                    }
                }
                Ok(out)
            }
            TransformState::Keep { mask } => {
                numeric_complete(&cols, &self.kind)?;
                Ok(cols
                    .into_iter()
                    .zip(mask)
                    .filter(|(_, &keep)| keep)
                    .map(|(col, _)| col)
                    .collect())
            }
            TransformState::Poly => {
                let numeric = numeric_complete(&cols, &self.kind)?;
                let m = numeric.len();
                let mut out: Vec<WorkCol> = numeric
                    .iter()
                    .map(|v| WorkCol::Numeric(v.iter().map(|&x| Some(x)).collect()))
                    .collect();
                for i in 0..m {
                    for j in i..m {
                        let product: Vec<Option<f64>> = numeric[i]
                            .iter()
                            .zip(&numeric[j])
                            .map(|(&a, &b)| Some(a * b))
                            .collect();
                        out.push(WorkCol::Numeric(product));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// A whole fitted chain: the fit-time column layout plus the fitted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedChain {
    layout: Vec<(String, FeatureKind)>,
    steps: Vec<FittedTransform>,
    output_arity: usize,
}

impl FittedChain {
    pub fn steps(&self) -> &[FittedTransform] {
        &self.steps
    }

    pub fn output_arity(&self) -> usize {
        self.output_arity
    }

    pub fn layout(&self) -> &[(String, FeatureKind)] {
        &self.layout
    }
}

fn finalize(cols: Vec<WorkCol>, n_rows: usize) -> Result<Array2<f64>, PreprocessError> {
    let mut out = Array2::zeros((n_rows, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        match col {
            WorkCol::Categorical(_) => {
                return Err(PreprocessError::ChainOrderInvalid {
                    step: "output".into(),
                    reason: format!("column {j} is still categorical at the end of the chain"),
                })
            }
            WorkCol::Numeric(v) => {
                for (i, x) in v.iter().enumerate() {
                    match x {
                        Some(value) => out[[i, j]] = *value,
                        None => {
                            return Err(PreprocessError::ChainOrderInvalid {
                                step: "output".into(),
                                reason: format!("column {j} still has missing values at the end of the chain"),
                            })
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn frame_to_work(frame: &Frame) -> Vec<WorkCol> {
    frame.columns.iter().map(|c| WorkCol::from_values(&c.values)).collect()
}

/// Fits every step in order on the training data and returns the fitted
/// chain together with the transformed training matrix. Fitting sees only
/// the given data.
pub fn fit_transform_chain(
    steps: &[TransformKind],
    train: &Dataset,
) -> Result<(FittedChain, Array2<f64>), PreprocessError> {
    let layout: Vec<(String, FeatureKind)> = train
        .frame()
        .columns
        .iter()
        .map(|c| (c.name.clone(), c.values.kind()))
        .collect();
    let mut work = frame_to_work(train.frame());
    let mut fitted = Vec::with_capacity(steps.len());
    for kind in steps {
        let step = FittedTransform::fit(kind, &work)?;
        work = step.apply(work)?;
        fitted.push(step);
    }
    let matrix = finalize(work, train.n_rows())?;
    let chain = FittedChain { layout, steps: fitted, output_arity: matrix.ncols() };
    Ok((chain, matrix))
}

/// Replays a fitted chain on new data with the fit-time layout. Extra
/// columns in the frame are ignored; order does not matter.
pub fn apply_chain(chain: &FittedChain, frame: &Frame) -> Result<Array2<f64>, PreprocessError> {
    let mut ordered: Vec<&Column> = Vec::with_capacity(chain.layout.len());
    for (name, kind) in &chain.layout {
        let col = frame
            .columns
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| PreprocessError::UnknownColumn(name.clone()))?;
        if col.values.kind() != *kind {
            return Err(PreprocessError::KindMismatch {
                column: name.clone(),
                expected: *kind,
                got: col.values.kind(),
            });
        }
        ordered.push(col);
    }
    let n_rows = ordered.first().map_or(0, |c| c.values.len());
    let mut work: Vec<WorkCol> =
        ordered.iter().map(|c| WorkCol::from_values(&c.values)).collect();
    for step in &chain.steps {
        work = step.apply(work)?;
    }
    finalize(work, n_rows)
}

/// Applies a fitted chain to a dataset's feature frame.
pub fn apply_chain_dataset(
    chain: &FittedChain,
    data: &Dataset,
) -> Result<Array2<f64>, PreprocessError> {
    apply_chain(chain, data.frame())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnValues, Dataset};

    fn numeric_col(name: &str, values: Vec<Option<f64>>) -> Column {
        Column { name: name.into(), values: ColumnValues::Numeric(values) }
    }

    fn cat_col(name: &str, values: Vec<Option<&str>>) -> Column {
        Column {
            name: name.into(),
            values: ColumnValues::Categorical(
                values.into_iter().map(|v| v.map(|s| s.to_string())).collect(),
            ),
        }
    }

    fn dataset(columns: Vec<Column>) -> Dataset {
        let n = columns[0].values.len();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        Dataset::new(columns, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn impute_learns_mean_of_present_values() {
        let d = dataset(vec![numeric_col("x", vec![Some(1.0), None, Some(3.0), Some(2.0)])]);
        let (_, m) = fit_transform_chain(&[TransformKind::ImputeMeanMode], &d).unwrap();
        assert_eq!(m[[1, 0]], 2.0);
        assert_eq!(m[[0, 0]], 1.0);
    }

    #[test]
    fn impute_mode_breaks_ties_lexicographically() {
        let d = dataset(vec![
            cat_col("c", vec![Some("red"), Some("blue"), None, Some("blue"), Some("red"), None]),
            numeric_col("x", vec![Some(0.0); 6].into_iter().collect()),
        ]);
        let (chain, m) =
            fit_transform_chain(&[TransformKind::ImputeMeanMode, TransformKind::OneHotEncode], &d)
                .unwrap();
        // vocabulary sorted: [blue, red]; tied counts impute "blue".
        assert_eq!(chain.output_arity(), 3);
        assert_eq!(m[[2, 0]], 1.0);
        assert_eq!(m[[2, 1]], 0.0);
    }

    #[test]
    fn onehot_two_symbol_vocabulary() {
        let d = dataset(vec![cat_col("c", vec![Some("red"), Some("blue"), Some("red"), Some("blue")])]);
        let (chain, m) = fit_transform_chain(&[TransformKind::OneHotEncode], &d).unwrap();
        assert_eq!(chain.output_arity(), 2);
        // sorted vocab [blue, red]
        assert_eq!(m.row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(m.row(1).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn onehot_unseen_symbol_maps_to_zero_block() {
        let d = dataset(vec![cat_col("c", vec![Some("red"), Some("blue"), Some("red"), Some("blue")])]);
        let (chain, _) = fit_transform_chain(&[TransformKind::OneHotEncode], &d).unwrap();
        let probe = Frame {
            columns: vec![cat_col("c", vec![Some("green"), None])],
        };
        let m = apply_chain(&chain, &probe).unwrap();
        assert_eq!(m.row(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(m.row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn standard_scale_zero_mean_unit_std_on_fit_data() {
        let d = dataset(vec![
            numeric_col("x", vec![Some(1.0), Some(4.0), Some(7.0), Some(10.0)]),
            numeric_col("constant", vec![Some(5.0); 4].into_iter().collect()),
        ]);
        let (_, m) = fit_transform_chain(&[TransformKind::StandardScale], &d).unwrap();
        // Recompute the moments of the output.
        let col: Vec<f64> = m.column(0).to_vec();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let std = sample_variance(&col).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-9);
        assert!(m.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn minmax_extrapolates_without_clipping() {
        let d = dataset(vec![numeric_col("x", vec![Some(0.0), Some(10.0), Some(5.0), Some(2.0)])]);
        let (chain, _) = fit_transform_chain(&[TransformKind::MinMaxScale], &d).unwrap();
        let probe = Frame { columns: vec![numeric_col("x", vec![Some(20.0)])] };
        let m = apply_chain(&chain, &probe).unwrap();
        assert_eq!(m[[0, 0]], 2.0);
    }

    #[test]
    fn replay_on_fit_data_is_identical() {
        let d = dataset(vec![
            numeric_col("x", vec![Some(1.0), None, Some(3.0), Some(9.0)]),
            cat_col("c", vec![Some("u"), Some("v"), None, Some("u")]),
        ]);
        let steps = [
            TransformKind::ImputeMeanMode,
            TransformKind::OneHotEncode,
            TransformKind::StandardScale,
        ];
        let (chain, fit_m) = fit_transform_chain(&steps, &d).unwrap();
        let replay = apply_chain_dataset(&chain, &d).unwrap();
        assert_eq!(fit_m, replay);
    }

    #[test]
    fn variance_filter_keeps_exactly_above_threshold() {
        let d = dataset(vec![
            numeric_col("constant", vec![Some(3.0); 5].into_iter().collect()),
            numeric_col("tiny", vec![Some(0.0), Some(0.001), Some(0.0), Some(0.001), Some(0.0)]),
            numeric_col("wide", vec![Some(0.0), Some(10.0), Some(5.0), Some(2.0), Some(8.0)]),
        ]);
        let (chain, m) = fit_transform_chain(&[TransformKind::VarianceFilter(0.0)], &d).unwrap();
        assert_eq!(chain.output_arity(), 2);
        assert_eq!(m.ncols(), 2);

        // Oracle: recompute which sample variances exceed the threshold.
        let vals = [
            vec![3.0; 5],
            vec![0.0, 0.001, 0.0, 0.001, 0.0],
            vec![0.0, 10.0, 5.0, 2.0, 8.0],
        ];
        let expected: Vec<bool> = vals.iter().map(|v| sample_variance(v) > 0.0).collect();
        assert_eq!(expected, vec![false, true, true]);

        let (_, m2) = fit_transform_chain(&[TransformKind::VarianceFilter(1.0)], &d).unwrap();
        assert_eq!(m2.ncols(), 1);

        assert!(matches!(
            fit_transform_chain(&[TransformKind::VarianceFilter(1e9)], &d),
            Err(PreprocessError::EmptyOutput)
        ));
    }

    #[test]
    fn polynomial_expansion_count_and_order() {
        let d = dataset(vec![
            numeric_col("x", vec![Some(2.0), Some(1.0)]),
            numeric_col("y", vec![Some(3.0), Some(5.0)]),
        ]);
        let (chain, m) = fit_transform_chain(&[TransformKind::PolynomialExpand], &d).unwrap();
        // m + m(m+1)/2 = 2 + 3 columns: x, y, x*x, x*y, y*y.
        assert_eq!(chain.output_arity(), 5);
        assert_eq!(m.row(0).to_vec(), vec![2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(m.row(1).to_vec(), vec![1.0, 5.0, 1.0, 5.0, 25.0]);
    }

    #[test]
    fn numeric_only_step_rejects_categorical_input() {
        let d = dataset(vec![cat_col("c", vec![Some("a"), Some("b"), Some("a"), Some("b")])]);
        assert!(matches!(
            fit_transform_chain(&[TransformKind::StandardScale], &d),
            Err(PreprocessError::ChainOrderInvalid { .. })
        ));
    }

    #[test]
    fn numeric_only_step_rejects_missing_input() {
        let d = dataset(vec![numeric_col("x", vec![Some(1.0), None, Some(2.0), Some(4.0)])]);
        assert!(matches!(
            fit_transform_chain(&[TransformKind::MinMaxScale], &d),
            Err(PreprocessError::ChainOrderInvalid { .. })
        ));
    }

    #[test]
    fn empty_chain_requires_complete_numeric_data() {
        let clean = dataset(vec![numeric_col("x", vec![Some(1.0), Some(2.0)])]);
        let (chain, m) = fit_transform_chain(&[], &clean).unwrap();
        assert_eq!(chain.output_arity(), 1);
        assert_eq!(m[[1, 0]], 2.0);

        let dirty = dataset(vec![cat_col("c", vec![Some("a"), Some("b")])]);
        assert!(matches!(
            fit_transform_chain(&[], &dirty),
            Err(PreprocessError::ChainOrderInvalid { .. })
        ));
    }

    #[test]
    fn apply_checks_layout() {
        let d = dataset(vec![numeric_col("x", vec![Some(1.0), Some(2.0)])]);
        let (chain, _) = fit_transform_chain(&[], &d).unwrap();

        let missing = Frame { columns: vec![numeric_col("other", vec![Some(1.0)])] };
        assert!(matches!(
            apply_chain(&chain, &missing),
            Err(PreprocessError::UnknownColumn(_))
        ));

        let wrong_kind = Frame { columns: vec![cat_col("x", vec![Some("a")])] };
        assert!(matches!(
            apply_chain(&chain, &wrong_kind),
            Err(PreprocessError::KindMismatch { .. })
        ));
    }

    #[test]
    fn fit_determinism() {
        let d = dataset(vec![
            numeric_col("x", vec![Some(1.0), None, Some(3.5), Some(9.0)]),
            cat_col("c", vec![Some("u"), Some("v"), None, Some("u")]),
        ]);
        let steps = [TransformKind::ImputeMeanMode, TransformKind::OneHotEncode];
        let (c1, m1) = fit_transform_chain(&steps, &d).unwrap();
        let (c2, m2) = fit_transform_chain(&steps, &d).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(
            serde_json::to_string(&c1).unwrap(),
            serde_json::to_string(&c2).unwrap()
        );
    }

    #[test]
    fn parse_step_names() {
        assert_eq!(TransformKind::parse("impute"), Some(TransformKind::ImputeMeanMode));
        assert_eq!(
            TransformKind::parse("variance_filter(0.5)"),
            Some(TransformKind::VarianceFilter(0.5))
        );
        assert_eq!(TransformKind::parse("poly2"), Some(TransformKind::PolynomialExpand));
        assert_eq!(TransformKind::parse("pca"), None);
        assert_eq!(TransformKind::parse("variance_filter(-1)"), None);
    }
}
