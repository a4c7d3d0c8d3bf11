//! Multinomial logistic regression trained by full-batch gradient descent
//! with a fixed step size. The weight matrix carries an unregularized bias
//! column; initial weights are small seeded uniforms so runs are reproducible.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLogistic {
    /// n_classes x (n_features + 1); last column is the bias.
    weights: Array2<f64>,
    loss_trace: Vec<f64>,
}

fn with_bias(x: &Array2<f64>) -> Array2<f64> {
    let (n, m) = x.dim();
    let mut xb = Array2::ones((n, m + 1));
    xb.slice_mut(ndarray::s![.., ..m]).assign(x);
    xb
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    l2_penalty: f64,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> FittedLogistic {
    let xb = with_bias(x);
    let (n, mb) = xb.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::from_shape_fn((n_classes, mb), |_| rng.gen_range(-0.01..0.01));

    let mut onehot = Array2::<f64>::zeros((n, n_classes));
    for (i, &l) in y.iter().enumerate() {
        onehot[[i, l]] = 1.0;
    }

    let mut loss_trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut probs = xb.dot(&w.t());
        softmax_rows(&mut probs);

        let mut loss = 0.0;
        for (i, &l) in y.iter().enumerate() {
            loss -= probs[[i, l]].max(1e-300).ln();
        }
        loss /= n as f64;
        let mut penalty = 0.0;
        for c in 0..n_classes {
            for j in 0..mb - 1 {
                penalty += w[[c, j]] * w[[c, j]];
            }
        }
        loss += 0.5 * l2_penalty * penalty;
        loss_trace.push(loss);

        let residual = &probs - &onehot;
        let mut grad = residual.t().dot(&xb);
        grad.mapv_inplace(|v| v / n as f64);
        if l2_penalty > 0.0 {
            let mut reg = w.clone();
            reg.index_axis_mut(Axis(1), mb - 1).assign(&Array1::zeros(n_classes));
            grad.scaled_add(l2_penalty, &reg);
        }
        w.scaled_add(-learning_rate, &grad);
    }

    FittedLogistic { weights: w, loss_trace }
}

impl FittedLogistic {
    pub(super) fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let xb = with_bias(x);
        let mut probs = xb.dot(&self.weights.t());
        softmax_rows(&mut probs);
        probs
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }
}
