//! K-nearest-neighbour classifier over squared Euclidean distance.
//!
//! Votes are Laplace-smoothed fractions over the k selected neighbours.
//! Neighbours are ordered by (distance, label), which makes the selected
//! label multiset invariant under permutations of the training rows. A query
//! that coincides with a training point (distance exactly zero) returns the
//! unsmoothed label frequencies of its zero-distance neighbours, so training
//! points predict their own label as a one-hot row.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedKnn {
    k: usize,
    train: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

pub(super) fn fit(k: usize, x: &Array2<f64>, y: &[usize], n_classes: usize) -> FittedKnn {
    FittedKnn { k, train: x.clone(), labels: y.to_vec(), n_classes }
}

impl FittedKnn {
    pub(super) fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let n_train = self.train.nrows();
        let k = self.k.min(n_train);
        let mut out = Array2::zeros((x.nrows(), self.n_classes));

        for (q, query) in x.rows().into_iter().enumerate() {
            let mut candidates: Vec<(f64, usize)> = self
                .train
                .rows()
                .into_iter()
                .zip(&self.labels)
                .map(|(row, &label)| {
                    let d2: f64 = row
                        .iter()
                        .zip(query.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, label)
                })
                .collect();
            candidates
                .sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let selected = &candidates[..k];

            let mut row = out.row_mut(q);
            if selected[0].0 == 0.0 {
                let zeros: Vec<usize> =
                    selected.iter().take_while(|(d, _)| *d == 0.0).map(|&(_, l)| l).collect();
                for &l in &zeros {
                    row[l] += 1.0 / zeros.len() as f64;
                }
            } else {
                let denom = (k + self.n_classes) as f64;
                for c in 0..self.n_classes {
                    row[c] = 1.0 / denom;
                }
                for &(_, l) in selected {
                    row[l] += 1.0 / denom;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::learners::{fit, ClassifierSpec};
    use ndarray::array;

    #[test]
    fn laplace_smoothed_vote_fractions() {
        // Neighbours of the origin at k=3 carry labels {0, 0, 1}; with
        // alpha=1 smoothing over 2 classes: (2+1)/(3+2), (1+1)/(3+2).
        let x = array![[1.0], [2.0], [3.0], [10.0]];
        let y = vec![0, 0, 1, 1];
        let model = fit(&ClassifierSpec::Knn { k: 3 }, &x, &y, 2).unwrap();
        let p = model.predict_proba(&array![[0.0]]).unwrap();
        assert!((p.data()[[0, 0]] - 3.0 / 5.0).abs() < 1e-12);
        assert!((p.data()[[0, 1]] - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn k1_on_training_points_is_one_hot() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [2.0, 2.0], [3.0, 1.5]];
        let y = vec![0, 1, 0, 1];
        let model = fit(&ClassifierSpec::Knn { k: 1 }, &x, &y, 2).unwrap();
        let p = model.predict_proba(&x).unwrap();
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(p.data()[[i, label]], 1.0);
            assert_eq!(p.data()[[i, 1 - label]], 0.0);
        }
    }

    #[test]
    fn training_row_permutation_leaves_predictions_unchanged() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]];
        let y = vec![0, 0, 1, 0, 1, 1];
        let perm = [5, 2, 0, 4, 1, 3];
        let xp = ndarray::Array2::from_shape_fn((6, 1), |(i, j)| x[[perm[i], j]]);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();

        let spec = ClassifierSpec::Knn { k: 3 };
        let a = fit(&spec, &x, &y, 2).unwrap();
        let b = fit(&spec, &xp, &yp, 2).unwrap();
        let probe = array![[0.4], [2.6], [4.9], [1.5]];
        assert_eq!(a.predict_proba(&probe).unwrap(), b.predict_proba(&probe).unwrap());
    }

    #[test]
    fn k_larger_than_train_set_clamps() {
        let x = array![[0.0], [1.0]];
        let y = vec![0, 1];
        let model = fit(&ClassifierSpec::Knn { k: 10 }, &x, &y, 2).unwrap();
        let p = model.predict_proba(&array![[0.4]]).unwrap();
        // Both rows selected, smoothing over k'=2: (1+1)/(2+2) each.
        assert!((p.data()[[0, 0]] - 0.5).abs() < 1e-12);
    }
}
