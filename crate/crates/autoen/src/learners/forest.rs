//! Random forest: bagged CART trees with per-split feature subsetting.
//!
//! Tree `t` draws its bootstrap sample and split subsets from an RNG seeded
//! with `seed + t`, so the forest is reproducible and independent of the
//! parallel schedule. The forest probability is the arithmetic mean of its
//! trees' probabilities, accumulated in tree order.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FittedTree, GrowParams};
use super::FeatureSubsetRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedForest {
    trees: Vec<FittedTree>,
    n_classes: usize,
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    n_trees: usize,
    max_depth: usize,
    feature_subset: FeatureSubsetRule,
    seed: u64,
) -> FittedForest {
    let n = x.nrows();
    let subset_size = feature_subset.size(x.ncols());
    let trees: Vec<FittedTree> = (0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grow(
                GrowParams {
                    x,
                    y,
                    n_classes,
                    max_depth,
                    min_leaf: 1,
                    subset: Some((subset_size, rng)),
                },
                rows,
            )
        })
        .collect();
    FittedForest { trees, n_classes }
}

impl FittedForest {
    pub(super) fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for tree in &self.trees {
            for (i, row) in x.rows().into_iter().enumerate() {
                for (c, &p) in tree.predict_row(row).iter().enumerate() {
                    out[[i, c]] += p;
                }
            }
        }
        out.mapv_inplace(|v| v / self.trees.len() as f64);
        out
    }

    pub fn trees(&self) -> &[FittedTree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use crate::learners::{fit, ClassifierSpec, FeatureSubsetRule};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob_data(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 3));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2;
            let center = if label == 0 { -2.0 } else { 2.0 };
            for j in 0..3 {
                x[[i, j]] = center + rng.gen_range(-1.0..1.0);
            }
            y.push(label);
        }
        (x, y)
    }

    fn forest_spec(n_trees: usize, seed: u64) -> ClassifierSpec {
        ClassifierSpec::RandomForest {
            n_trees,
            max_depth: 6,
            feature_subset: FeatureSubsetRule::Sqrt,
            seed,
        }
    }

    #[test]
    fn single_tree_forest_equals_its_tree() {
        let (x, y) = blob_data(40, 1);
        let forest = fit(&forest_spec(1, 5), &x, &y, 2).unwrap();
        let p_forest = forest.predict_proba(&x).unwrap();
        // A forest of one tree must reproduce that tree's probabilities
        // exactly. A forest seeded at 5 grows tree 0 from seed 5+0.
        let trees = forest.forest_trees().unwrap();
        assert_eq!(trees.len(), 1);
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, &p) in trees[0].predict_row(row).iter().enumerate() {
                assert_eq!(p_forest.data()[[i, c]], p);
            }
        }
    }

    #[test]
    fn forest_probability_is_mean_of_tree_probabilities() {
        // Tree t of a forest seeded at s is grown from seed s+t, so the
        // 3-tree forest at seed 9 equals the average of the 1-tree forests
        // at seeds 9, 10, 11.
        let (x, y) = blob_data(30, 2);
        let forest = fit(&forest_spec(3, 9), &x, &y, 2).unwrap();
        let p = forest.predict_proba(&x).unwrap();

        let singles: Vec<_> = (9..12)
            .map(|s| fit(&forest_spec(1, s), &x, &y, 2).unwrap().predict_proba(&x).unwrap())
            .collect();
        for i in 0..x.nrows() {
            for c in 0..2 {
                let mean = (singles[0].data()[[i, c]]
                    + singles[1].data()[[i, c]]
                    + singles[2].data()[[i, c]])
                    / 3.0;
                assert!((p.data()[[i, c]] - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn schedule_independent_for_fixed_seed() {
        let (x, y) = blob_data(30, 3);
        let spec = forest_spec(8, 21);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let p1 = one.install(|| fit(&spec, &x, &y, 2).unwrap().predict_proba(&x).unwrap());
        let p2 = many.install(|| fit(&spec, &x, &y, 2).unwrap().predict_proba(&x).unwrap());
        assert_eq!(p1, p2);
    }
}
