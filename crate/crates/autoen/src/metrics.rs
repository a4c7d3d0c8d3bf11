//! Scoring functions: binary roc_auc via the Mann-Whitney rank identity,
//! clipped multi-class log loss, and argmax accuracy as a diagnostic.
//!
//! Binary roc_auc consumes the positive-class column of a probability matrix;
//! the positive class is class index 1 by convention.

use serde::{Deserialize, Serialize};

use crate::learners::ProbabilityMatrix;
use crate::stats::Direction;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("only one class present in labels")]
    SingleClassPresent,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),
    #[error("labels must be 0/1 for binary roc_auc, found {0}")]
    NonBinaryLabel(usize),
    #[error("roc_auc requires a binary problem, got {0} classes")]
    NotBinary(usize),
}

/// Evaluation metric selector, also used as the greedy-selection objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    LogLoss,
    RocAuc,
}

impl Metric {
    pub fn direction(&self) -> Direction {
        match self {
            Metric::LogLoss => Direction::LowerBetter,
            Metric::RocAuc => Direction::HigherBetter,
        }
    }

    /// True when `a` is strictly better than `b` under this metric.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.direction() {
            Direction::LowerBetter => a < b,
            Direction::HigherBetter => a > b,
        }
    }

    /// Scores a probability matrix against labels. RocAuc requires a binary
    /// problem and uses the class-1 column as the score.
    pub fn score(&self, probs: &ProbabilityMatrix, labels: &[usize]) -> Result<f64, MetricError> {
        match self {
            Metric::LogLoss => log_loss_multiclass(probs, labels),
            Metric::RocAuc => {
                if probs.n_classes() != 2 {
                    return Err(MetricError::NotBinary(probs.n_classes()));
                }
                roc_auc_binary(&probs.column_vec(1), labels)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::LogLoss => "log_loss",
            Metric::RocAuc => "roc_auc",
        }
    }
}

/// Midranks of the scores: tied values share the mean of their positions.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via rank sums: the probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn roc_auc_binary(scores: &[f64], labels: &[usize]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(pos));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(MetricError::NonBinaryLabel(bad));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClassPresent);
    }

    let ranks = midranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&r, _)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

const LOG_LOSS_EPS: f64 = 1e-15;

/// Mean negative log-probability of the true class. Each row is clipped to
/// `[eps, 1-eps]` entrywise and re-normalized before the log is taken.
pub fn log_loss_multiclass(
    probs: &ProbabilityMatrix,
    labels: &[usize],
) -> Result<f64, MetricError> {
    if probs.n_rows() != labels.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            probs.n_rows(),
            labels.len()
        )));
    }
    let c = probs.n_classes();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(MetricError::ShapeMismatch(format!(
                "label {label} out of range for {c} classes"
            )));
        }
        let row = probs.row(i);
        let mut sum = 0.0;
        for &p in row {
            sum += p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        }
        let p_true = row[label].clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS) / sum;
        total -= p_true.ln();
    }
    Ok(total / labels.len() as f64)
}

/// Fraction of rows whose argmax (ties to the lowest class index) equals the
/// label. Diagnostic only.
pub fn accuracy(probs: &ProbabilityMatrix, labels: &[usize]) -> Result<f64, MetricError> {
    if probs.n_rows() != labels.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            probs.n_rows(),
            labels.len()
        )));
    }
    let predicted = probs.argmax_rows();
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// O(n^2) pair-counting AUC, kept as the independent oracle for the rank
/// implementation. Test-support code.
pub fn roc_auc_pair_oracle(scores: &[f64], labels: &[usize]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
