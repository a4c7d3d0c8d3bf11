//! CART-style decision tree: Gini impurity, midpoint thresholds between
//! distinct feature values, splits tied on impurity broken by lowest feature
//! index then lowest threshold. Leaves hold Laplace-smoothed class
//! frequencies.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n) * (c as f64 / n)).sum::<f64>()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Scans the candidate features (already in ascending index order) for the
/// split minimizing the weighted child Gini. Returns None when no split has
/// positive gain or satisfies the min_leaf constraint.
fn best_split(
    x: &Array2<f64>,
    y: &[usize],
    rows: &[usize],
    candidates: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = rows.len();
    let mut parent_counts = vec![0usize; n_classes];
    for &r in rows {
        parent_counts[y[r]] += 1;
    }
    let parent_gini = gini(&parent_counts, n);

    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);

    for &f in candidates {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (x[[r, f]], y[r])));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let mut left_counts = vec![0usize; n_classes];
        let mut left_n = 0usize;
        for i in 0..n - 1 {
            left_counts[sorted[i].1] += 1;
            left_n += 1;
            if sorted[i + 1].0 == sorted[i].0 {
                continue;
            }
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_counts: Vec<usize> = parent_counts
                .iter()
                .zip(&left_counts)
                .map(|(&p, &l)| p - l)
                .collect();
            let weighted = (left_n as f64 * gini(&left_counts, left_n)
                + right_n as f64 * gini(&right_counts, right_n))
                / n as f64;
            let gain = parent_gini - weighted;
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                let threshold = (sorted[i].0 + sorted[i + 1].0) / 2.0;
                best = Some(BestSplit { feature: f, threshold, gain });
            }
        }
    }
    best
}

fn leaf_probs(y: &[usize], rows: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &r in rows {
        counts[y[r]] += 1;
    }
    let denom = (rows.len() + n_classes) as f64;
    counts.iter().map(|&c| (c + 1) as f64 / denom).collect()
}

pub(super) struct GrowParams<'a> {
    pub x: &'a Array2<f64>,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn at each split when subsetting (forests); the full
    /// feature set is scanned when absent.
    pub subset: Option<(usize, ChaCha8Rng)>,
}

pub(super) fn grow(mut params: GrowParams<'_>, rows: Vec<usize>) -> FittedTree {
    let mut nodes = Vec::new();
    let n_classes = params.n_classes;
    grow_node(&mut params, rows, 0, &mut nodes);
    FittedTree { nodes, n_classes }
}

fn grow_node(
    params: &mut GrowParams<'_>,
    rows: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let n_features = params.x.ncols();
    let make_leaf = |nodes: &mut Vec<Node>, rows: &[usize], params: &GrowParams<'_>| {
        nodes.push(Node::Leaf { probs: leaf_probs(params.y, rows, params.n_classes) });
        nodes.len() - 1
    };

    if depth >= params.max_depth || rows.len() < 2 * params.min_leaf || rows.len() < 2 {
        return make_leaf(nodes, &rows, params);
    }

    let candidates: Vec<usize> = match &mut params.subset {
        Some((size, rng)) => {
            let k = (*size).min(n_features);
            let mut chosen = rand::seq::index::sample(rng, n_features, k).into_vec();
            chosen.sort_unstable();
            chosen
        }
        None => (0..n_features).collect(),
    };

    let Some(split) =
        best_split(params.x, params.y, &rows, &candidates, params.n_classes, params.min_leaf)
    else {
        return make_leaf(nodes, &rows, params);
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| params.x[[r, split.feature]] <= split.threshold);

    let idx = nodes.len();
    nodes.push(Node::Split { feature: split.feature, threshold: split.threshold, left: 0, right: 0 });
    let left = grow_node(params, left_rows, depth + 1, nodes);
    let right = grow_node(params, right_rows, depth + 1, nodes);
    match &mut nodes[idx] {
        Node::Split { left: l, right: r, .. } => {
            *l = left;
            *r = right;
        }
        Node::Leaf { .. } => unreachable!(),
    }
    idx
}

pub(super) fn fit(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
) -> FittedTree {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    grow(GrowParams { x, y, n_classes, max_depth, min_leaf, subset: None }, rows)
}

impl FittedTree {
    pub(crate) fn predict_row(&self, row: ndarray::ArrayView1<'_, f64>) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { probs } => return probs,
            }
        }
    }

    pub(super) fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let probs = self.predict_row(row);
            for (c, &p) in probs.iter().enumerate() {
                out[[i, c]] = p;
            }
        }
        out
    }
}
