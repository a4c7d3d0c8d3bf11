//! Gaussian naive Bayes with Laplace-smoothed class priors.
//!
//! Per-class feature variances get an additive floor of
//! `var_smoothing * max_total_variance` (the largest population variance of
//! any feature over the whole training set), so constant features stay
//! well-defined. Posteriors are computed in log space and normalized with
//! log-sum-exp.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGaussianNb {
    log_priors: Vec<f64>,
    /// n_classes x n_features
    means: Array2<f64>,
    variances: Array2<f64>,
    n_classes: usize,
}

pub(super) fn fit(
    var_smoothing: f64,
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
) -> FittedGaussianNb {
    let (n, m) = x.dim();
    let mut counts = vec![0usize; n_classes];
    for &l in y {
        counts[l] += 1;
    }

    let mut means = Array2::<f64>::zeros((n_classes, m));
    for (i, row) in x.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            means[[y[i], j]] += v;
        }
    }
    for c in 0..n_classes {
        for j in 0..m {
            means[[c, j]] /= counts[c] as f64;
        }
    }

    let mut variances = Array2::<f64>::zeros((n_classes, m));
    for (i, row) in x.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let d = v - means[[y[i], j]];
            variances[[y[i], j]] += d * d;
        }
    }
    for c in 0..n_classes {
        for j in 0..m {
            variances[[c, j]] /= counts[c] as f64;
        }
    }

    // Variance floor from the pooled per-feature variance.
    let mut max_total_var = 0.0f64;
    for j in 0..m {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        max_total_var = max_total_var.max(var);
    }
    let eps = if max_total_var > 0.0 { var_smoothing * max_total_var } else { var_smoothing };
    variances.mapv_inplace(|v| v + eps);

    let log_priors = counts
        .iter()
        .map(|&c| (((c + 1) as f64) / ((n + n_classes) as f64)).ln())
        .collect();

    FittedGaussianNb { log_priors, means, variances, n_classes }
}

impl FittedGaussianNb {
    pub(super) fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let m = self.means.ncols();
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        const LN_2PI: f64 = 1.8378770664093453;

        for (i, row) in x.rows().into_iter().enumerate() {
            let mut log_post = vec![0.0f64; self.n_classes];
            for (c, lp) in log_post.iter_mut().enumerate() {
                let mut ll = self.log_priors[c];
                for j in 0..m {
                    let var = self.variances[[c, j]];
                    let d = row[j] - self.means[[c, j]];
                    ll += -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var);
                }
                *lp = ll;
            }
            let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for lp in &mut log_post {
                *lp = (*lp - max).exp();
                denom += *lp;
            }
            for (c, lp) in log_post.iter().enumerate() {
                out[[i, c]] = lp / denom;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::learners::{fit, ClassifierSpec};
    use ndarray::{array, Array2};

    /// Independent posterior: Gaussian likelihood ratio with the same
    /// smoothing conventions, written out directly.
    fn closed_form_posterior(
        x: f64,
        stats: &[(f64, f64, usize)], // per class: mean, population variance, count
        eps: f64,
        n: usize,
    ) -> Vec<f64> {
        let dens: Vec<f64> = stats
            .iter()
            .map(|&(mu, var, count)| {
                let v = var + eps;
                let prior = (count + 1) as f64 / (n + stats.len()) as f64;
                prior * (-((x - mu) * (x - mu)) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
            })
            .collect();
        let total: f64 = dens.iter().sum();
        dens.iter().map(|d| d / total).collect()
    }

    #[test]
    fn separated_clusters_confident_posterior() {
        // Two 1-D clusters around -10 and +10, five points each.
        let xs = [-10.2, -10.1, -10.0, -9.9, -9.8, 9.8, 9.9, 10.0, 10.1, 10.2];
        let x = Array2::from_shape_vec((10, 1), xs.to_vec()).unwrap();
        let y = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let model = fit(&ClassifierSpec::GaussianNb { var_smoothing: 1e-9 }, &x, &y, 2).unwrap();
        let p = model.predict_proba(&array![[-9.0]]).unwrap();
        assert!(p.data()[[0, 0]] > 0.99, "P(class 0) = {}", p.data()[[0, 0]]);

        // Against the closed-form oracle.
        let mean0 = xs[..5].iter().sum::<f64>() / 5.0;
        let var0 = xs[..5].iter().map(|v| (v - mean0) * (v - mean0)).sum::<f64>() / 5.0;
        let mean1 = xs[5..].iter().sum::<f64>() / 5.0;
        let var1 = xs[5..].iter().map(|v| (v - mean1) * (v - mean1)).sum::<f64>() / 5.0;
        let total_mean = xs.iter().sum::<f64>() / 10.0;
        let total_var =
            xs.iter().map(|v| (v - total_mean) * (v - total_mean)).sum::<f64>() / 10.0;
        let eps = 1e-9 * total_var;
        let expected =
            closed_form_posterior(-9.0, &[(mean0, var0, 5), (mean1, var1, 5)], eps, 10);
        assert!((p.data()[[0, 0]] - expected[0]).abs() < 1e-9);
        assert!((p.data()[[0, 1]] - expected[1]).abs() < 1e-9);
    }

    #[test]
    fn training_row_permutation_is_exact() {
        let x = array![[1.0, 2.0], [2.0, 1.0], [8.0, 9.0], [9.0, 8.0], [1.5, 1.5], [8.5, 8.5]];
        let y = vec![0, 0, 1, 1, 0, 1];
        let perm = [3, 0, 5, 1, 4, 2];
        let xp = Array2::from_shape_fn((6, 2), |(i, j)| x[[perm[i], j]]);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let spec = ClassifierSpec::GaussianNb { var_smoothing: 1e-9 };
        let a = fit(&spec, &x, &y, 2).unwrap();
        let b = fit(&spec, &xp, &yp, 2).unwrap();
        let probe = array![[3.0, 3.0], [7.0, 7.5]];
        let pa = a.predict_proba(&probe).unwrap();
        let pb = b.predict_proba(&probe).unwrap();
        for i in 0..2 {
            for c in 0..2 {
                assert!((pa.data()[[i, c]] - pb.data()[[i, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_features_survive_smoothing() {
        let x = array![[1.0, 5.0], [1.0, 5.0], [2.0, 5.0], [2.0, 5.0]];
        let y = vec![0, 0, 1, 1];
        let model = fit(&ClassifierSpec::GaussianNb { var_smoothing: 1e-9 }, &x, &y, 2).unwrap();
        let p = model.predict_proba(&x).unwrap();
        assert!(p.data().iter().all(|v| v.is_finite()));
    }
}
