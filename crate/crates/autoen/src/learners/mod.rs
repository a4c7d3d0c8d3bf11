//! In-house probabilistic classifiers: k-nearest-neighbours, Gaussian naive
//! Bayes, CART decision trees, random forests and softmax logistic
//! regression. All of them emit row-stochastic probability matrices and are
//! deterministic for a fixed spec (including its seed), independent of thread
//! count.

mod forest;
mod knn;
mod logistic;
mod naive_bayes;
mod tree;

pub use forest::FittedForest;
pub use knn::FittedKnn;
pub use logistic::FittedLogistic;
pub use naive_bayes::FittedGaussianNb;
pub use tree::FittedTree;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("arity mismatch: model expects {expected} features, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("invalid probability matrix: {0}")]
    InvalidProbabilities(String),
}

/// How many candidate features a forest draws at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsetRule {
    /// round(sqrt(m)) features per split, at least one.
    Sqrt,
    /// Every feature at every split.
    All,
}

impl FeatureSubsetRule {
    pub(crate) fn size(&self, n_features: usize) -> usize {
        match self {
            FeatureSubsetRule::Sqrt => ((n_features as f64).sqrt().round() as usize).max(1),
            FeatureSubsetRule::All => n_features.max(1),
        }
    }
}

/// A classifier family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn { k: usize },
    GaussianNb { var_smoothing: f64 },
    DecisionTree { max_depth: usize, min_leaf: usize },
    RandomForest {
        n_trees: usize,
        max_depth: usize,
        feature_subset: FeatureSubsetRule,
        seed: u64,
    },
    Logistic { l2_penalty: f64, epochs: usize, learning_rate: f64, seed: u64 },
    /// Timing-harness probe: predicts the training class prior after sleeping
    /// `fit_base_millis + fit_millis_per_row * n_rows` during fit. Used to
    /// exercise the economy-mode time budget deterministically.
    DelayedPrior { fit_base_millis: u64, fit_millis_per_row: u64 },
}

impl ClassifierSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::GaussianNb { .. } => "gaussian_nb",
            ClassifierSpec::DecisionTree { .. } => "decision_tree",
            ClassifierSpec::RandomForest { .. } => "random_forest",
            ClassifierSpec::Logistic { .. } => "logistic",
            ClassifierSpec::DelayedPrior { .. } => "delayed_prior",
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let fail = |msg: String| Err(LearnerError::InvalidSpec(msg));
        match *self {
            ClassifierSpec::Knn { k } if k < 1 => fail(format!("knn k={k}, need k >= 1")),
            ClassifierSpec::GaussianNb { var_smoothing } if var_smoothing <= 0.0 => {
                fail(format!("gaussian_nb var_smoothing={var_smoothing}, need > 0"))
            }
            ClassifierSpec::DecisionTree { max_depth, min_leaf } if max_depth < 1 || min_leaf < 1 => {
                fail(format!("decision_tree max_depth={max_depth} min_leaf={min_leaf}, need >= 1"))
            }
            ClassifierSpec::RandomForest { n_trees, max_depth, .. }
                if n_trees < 1 || max_depth < 1 =>
            {
                fail(format!("random_forest n_trees={n_trees} max_depth={max_depth}, need >= 1"))
            }
            ClassifierSpec::Logistic { l2_penalty, epochs, learning_rate, .. }
                if l2_penalty < 0.0 || epochs < 1 || learning_rate <= 0.0 =>
            {
                fail(format!(
                    "logistic l2_penalty={l2_penalty} epochs={epochs} learning_rate={learning_rate}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Copy of the spec with any internal RNG seed replaced, used to derive
    /// per-pipeline seeds deterministically.
    pub fn with_seed(&self, seed: u64) -> ClassifierSpec {
        let mut spec = self.clone();
        match &mut spec {
            ClassifierSpec::RandomForest { seed: s, .. } => *s = seed,
            ClassifierSpec::Logistic { seed: s, .. } => *s = seed,
            _ => {}
        }
        spec
    }
}

/// n_samples x n_classes row-stochastic prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    data: Array2<f64>,
}

const ROW_SUM_TOL: f64 = 1e-9;

impl ProbabilityMatrix {
    /// Validates finiteness, non-negativity and row sums within 1e-9 of one.
    pub fn new(data: Array2<f64>) -> Result<Self, LearnerError> {
        for (i, row) in data.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 || p > 1.0 + ROW_SUM_TOL {
                    return Err(LearnerError::InvalidProbabilities(format!(
                        "entry {p} out of range in row {i}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(LearnerError::InvalidProbabilities(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(ProbabilityMatrix { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Class column as a plain vector (used as roc_auc scores).
    pub fn column_vec(&self, class: usize) -> Vec<f64> {
        self.data.column(class).to_vec()
    }

    /// Argmax class per row, ties to the lowest class index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.data
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Weighted arithmetic mean of matrices, accumulated in the given order.
    pub fn weighted_mean(parts: &[(&ProbabilityMatrix, f64)]) -> Result<Self, LearnerError> {
        let Some(((first, _), rest)) = parts.split_first() else {
            return Err(LearnerError::InvalidProbabilities("empty mean".into()));
        };
        for (m, _) in rest {
            if m.data.dim() != first.data.dim() {
                return Err(LearnerError::InvalidProbabilities(
                    "shape mismatch in weighted mean".into(),
                ));
            }
        }
        let total: f64 = parts.iter().map(|(_, w)| *w).sum();
        if total <= 0.0 {
            return Err(LearnerError::InvalidProbabilities("non-positive total weight".into()));
        }
        let mut acc = Array2::<f64>::zeros(first.data.dim());
        for (m, w) in parts {
            acc.scaled_add(*w, &m.data);
        }
        acc.mapv_inplace(|v| v / total);
        ProbabilityMatrix::new(acc)
    }
}

/// A trained classifier together with its spec and input/output shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    spec: ClassifierSpec,
    n_classes: usize,
    n_features: usize,
    state: FittedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FittedState {
    Knn(FittedKnn),
    GaussianNb(FittedGaussianNb),
    Tree(FittedTree),
    Forest(FittedForest),
    Logistic(FittedLogistic),
    Prior(Vec<f64>),
}

pub(crate) fn check_finite(x: &Array2<f64>) -> Result<(), LearnerError> {
    for ((row, col), &v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(LearnerError::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

/// Trains a classifier. `y` must lie in `[0, n_classes)` with every class
/// present at least once.
pub fn fit(
    spec: &ClassifierSpec,
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<FittedClassifier, LearnerError> {
    spec.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(LearnerError::DegenerateInput(format!(
            "{} rows x {} features",
            x.nrows(),
            x.ncols()
        )));
    }
    if y.len() != x.nrows() {
        return Err(LearnerError::DegenerateInput(format!(
            "{} labels for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if n_classes < 2 {
        return Err(LearnerError::DegenerateInput("fewer than two classes".into()));
    }
    check_finite(x)?;
    let mut counts = vec![0usize; n_classes];
    for &l in y {
        if l >= n_classes {
            return Err(LearnerError::DegenerateInput(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    if let Some(absent) = counts.iter().position(|&c| c == 0) {
        return Err(LearnerError::DegenerateInput(format!(
            "class {absent} has no training rows"
        )));
    }

    let state = match spec {
        ClassifierSpec::Knn { k } => FittedState::Knn(knn::fit(*k, x, y, n_classes)),
        ClassifierSpec::GaussianNb { var_smoothing } => {
            FittedState::GaussianNb(naive_bayes::fit(*var_smoothing, x, y, n_classes))
        }
        ClassifierSpec::DecisionTree { max_depth, min_leaf } => {
            FittedState::Tree(tree::fit(x, y, n_classes, *max_depth, *min_leaf))
        }
        ClassifierSpec::RandomForest { n_trees, max_depth, feature_subset, seed } => {
            FittedState::Forest(forest::fit(
                x,
                y,
                n_classes,
                *n_trees,
                *max_depth,
                *feature_subset,
                *seed,
            ))
        }
        ClassifierSpec::Logistic { l2_penalty, epochs, learning_rate, seed } => {
            FittedState::Logistic(logistic::fit(
                x,
                y,
                n_classes,
                *l2_penalty,
                *epochs,
                *learning_rate,
                *seed,
            ))
        }
        ClassifierSpec::DelayedPrior { fit_base_millis, fit_millis_per_row } => {
            let millis = fit_base_millis + fit_millis_per_row * x.nrows() as u64;
            std::thread::sleep(std::time::Duration::from_millis(millis));
            let n = y.len() as f64;
            FittedState::Prior(counts.iter().map(|&c| c as f64 / n).collect())
        }
    };
    Ok(FittedClassifier { spec: spec.clone(), n_classes, n_features: x.ncols(), state })
}

impl FittedClassifier {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<ProbabilityMatrix, LearnerError> {
        if x.ncols() != self.n_features {
            return Err(LearnerError::ArityMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        check_finite(x)?;
        let data = match &self.state {
            FittedState::Knn(m) => m.predict(x),
            FittedState::GaussianNb(m) => m.predict(x),
            FittedState::Tree(m) => m.predict(x),
            FittedState::Forest(m) => m.predict(x),
            FittedState::Logistic(m) => m.predict(x),
            FittedState::Prior(prior) => {
                let mut out = Array2::zeros((x.nrows(), self.n_classes));
                for mut row in out.rows_mut() {
                    for (c, &p) in prior.iter().enumerate() {
                        row[c] = p;
                    }
                }
                out
            }
        };
        ProbabilityMatrix::new(data)
    }

    /// Direct access to the forest's per-tree predictors, for tests of the
    /// mean-of-trees identity.
    pub fn forest_trees(&self) -> Option<&[FittedTree]> {
        match &self.state {
            FittedState::Forest(f) => Some(f.trees()),
            _ => None,
        }
    }

    /// Per-epoch regularized training loss, recorded by logistic fits.
    pub fn logistic_loss_trace(&self) -> Option<&[f64]> {
        match &self.state {
            FittedState::Logistic(m) => Some(m.loss_trace()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn xor_data() -> (Array2<f64>, Vec<usize>) {
        (
            array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
    }

    #[test]
    fn probability_matrix_validates() {
        assert!(ProbabilityMatrix::new(array![[0.5, 0.5], [1.0, 0.0]]).is_ok());
        assert!(ProbabilityMatrix::new(array![[0.6, 0.6]]).is_err());
        assert!(ProbabilityMatrix::new(array![[-0.1, 1.1]]).is_err());
        assert!(ProbabilityMatrix::new(array![[f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn weighted_mean_matches_definition() {
        let a = ProbabilityMatrix::new(array![[0.8, 0.2]]).unwrap();
        let b = ProbabilityMatrix::new(array![[0.2, 0.8]]).unwrap();
        let m = ProbabilityMatrix::weighted_mean(&[(&a, 2.0), (&b, 1.0)]).unwrap();
        let expected = (2.0 * 0.8 + 0.2) / 3.0;
        assert_eq!(m.data()[[0, 0]], expected);
        assert_eq!(m.data()[[0, 1]], (2.0 * 0.2 + 0.8) / 3.0);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let x = Array2::<f64>::zeros((0, 2));
        let spec = ClassifierSpec::Knn { k: 1 };
        assert!(matches!(fit(&spec, &x, &[], 2), Err(LearnerError::DegenerateInput(_))));

        let (x, y) = xor_data();
        assert!(matches!(
            fit(&spec, &x, &y[..3], 2),
            Err(LearnerError::DegenerateInput(_))
        ));
        // class 1 absent
        assert!(matches!(
            fit(&spec, &x, &[0, 0, 0, 0], 2),
            Err(LearnerError::DegenerateInput(_))
        ));
    }

    #[test]
    fn fit_rejects_non_finite() {
        let x = array![[1.0, f64::NAN], [2.0, 0.0]];
        let spec = ClassifierSpec::Knn { k: 1 };
        assert!(matches!(
            fit(&spec, &x, &[0, 1], 2),
            Err(LearnerError::NonFiniteFeature { row: 0, col: 1 })
        ));
    }

    #[test]
    fn predict_rejects_arity_mismatch() {
        let (x, y) = xor_data();
        let model = fit(&ClassifierSpec::Knn { k: 1 }, &x, &y, 2).unwrap();
        let probe = array![[1.0, 2.0, 3.0]];
        assert!(matches!(
            model.predict_proba(&probe),
            Err(LearnerError::ArityMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ClassifierSpec::Knn { k: 0 }.validate().is_err());
        assert!(ClassifierSpec::DecisionTree { max_depth: 0, min_leaf: 1 }.validate().is_err());
        assert!(ClassifierSpec::RandomForest {
            n_trees: 0,
            max_depth: 4,
            feature_subset: FeatureSubsetRule::Sqrt,
            seed: 0
        }
        .validate()
        .is_err());
        assert!(ClassifierSpec::Logistic {
            l2_penalty: -1.0,
            epochs: 10,
            learning_rate: 0.1,
            seed: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn delayed_prior_predicts_class_frequencies() {
        let (x, _) = xor_data();
        let spec = ClassifierSpec::DelayedPrior { fit_base_millis: 0, fit_millis_per_row: 0 };
        let model = fit(&spec, &x, &[0, 0, 0, 1], 2).unwrap();
        let p = model.predict_proba(&x).unwrap();
        for i in 0..4 {
            assert_eq!(p.data()[[i, 0]], 0.75);
            assert_eq!(p.data()[[i, 1]], 0.25);
        }
    }

    #[test]
    fn all_families_emit_row_stochastic_output() {
        let (x, y) = xor_data();
        let specs = vec![
            ClassifierSpec::Knn { k: 3 },
            ClassifierSpec::GaussianNb { var_smoothing: 1e-9 },
            ClassifierSpec::DecisionTree { max_depth: 4, min_leaf: 1 },
            ClassifierSpec::RandomForest {
                n_trees: 5,
                max_depth: 4,
                feature_subset: FeatureSubsetRule::Sqrt,
                seed: 3,
            },
            ClassifierSpec::Logistic {
                l2_penalty: 1e-3,
                epochs: 50,
                learning_rate: 0.5,
                seed: 3,
            },
        ];
        for spec in specs {
            let model = fit(&spec, &x, &y, 2).unwrap();
            // ProbabilityMatrix::new re-validates row sums within 1e-9.
            let p = model.predict_proba(&x).unwrap();
            assert_eq!(p.n_rows(), 4);
            assert_eq!(p.n_classes(), 2);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let (x, y) = xor_data();
        for spec in [
            ClassifierSpec::RandomForest {
                n_trees: 7,
                max_depth: 3,
                feature_subset: FeatureSubsetRule::Sqrt,
                seed: 11,
            },
            ClassifierSpec::Logistic { l2_penalty: 0.01, epochs: 30, learning_rate: 0.3, seed: 11 },
        ] {
            let a = fit(&spec, &x, &y, 2).unwrap();
            let b = fit(&spec, &x, &y, 2).unwrap();
            assert_eq!(a.predict_proba(&x).unwrap(), b.predict_proba(&x).unwrap());
        }
    }
}
