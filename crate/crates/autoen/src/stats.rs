//! Friedman multiple-comparison test with tie-averaged ranks and the Holm
//! step-down post-hoc procedure over method-by-dataset score tables.
//!
//! Scores are ranked per dataset (rank 1 = best under the table's direction,
//! ties replaced by midranks), the Friedman chi-square statistic is computed
//! from the average ranks, and Holm compares every method against a chosen
//! control with two-sided normal p-values adjusted step-down.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("score table needs at least 2 methods and 2 datasets, got {methods}x{datasets}")]
    TooSmall { methods: usize, datasets: usize },
    #[error("score grid is ragged or has missing cells")]
    MissingCells,
    #[error("non-finite score for method `{method}` on dataset `{dataset}`")]
    NonFiniteScore { method: String, dataset: String },
    #[error("unknown control method `{0}`")]
    UnknownControl(String),
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
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

/// Whether larger or smaller scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// A complete methods-by-datasets score grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// scores[m][d] for method m on dataset d.
    pub scores: Vec<Vec<f64>>,
    pub direction: Direction,
}

impl ScoreTable {
    pub fn new(
        methods: Vec<String>,
        datasets: Vec<String>,
        scores: Vec<Vec<f64>>,
        direction: Direction,
    ) -> Result<Self, StatsError> {
        if methods.len() < 2 || datasets.len() < 2 {
            return Err(StatsError::TooSmall {
                methods: methods.len(),
                datasets: datasets.len(),
            });
        }
        if scores.len() != methods.len() || scores.iter().any(|row| row.len() != datasets.len()) {
            return Err(StatsError::MissingCells);
        }
        for (m, row) in scores.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(StatsError::NonFiniteScore {
                        method: methods[m].clone(),
                        dataset: datasets[d].clone(),
                    });
                }
            }
        }
        Ok(ScoreTable { methods, datasets, scores, direction })
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    /// Reads a score table from CSV with a `method,<dataset>,...` header.
    /// Lines starting with `#` are comments.
    pub fn from_csv(path: &Path, direction: Direction) -> Result<Self, StatsError> {
        let wrap_csv = |source: csv::Error| StatsError::Csv {
            path: path.display().to_string(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(wrap_csv)?;
        let header = reader.headers().map_err(wrap_csv)?.clone();
        let datasets: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut methods = Vec::new();
        let mut scores = Vec::new();
        for record in reader.records() {
            let record = record.map_err(wrap_csv)?;
            let name = record.get(0).unwrap_or("").trim().to_string();
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(i, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| StatsError::Parse {
                        path: path.display().to_string(),
                        message: format!("bad score `{cell}` for {name} / {}", datasets[i]),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            methods.push(name);
            scores.push(row);
        }
        ScoreTable::new(methods, datasets, scores, direction)
    }
}

/// Per-dataset midranks and their per-method averages.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// ranks[m][d], each dataset column a midrank permutation of 1..k.
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
}

/// Ranks every dataset column (rank 1 = best, ties = midrank) and averages
/// over datasets.
pub fn average_ranks(table: &ScoreTable) -> RankTable {
    let k = table.n_methods();
    let n = table.n_datasets();
    let mut ranks = vec![vec![0.0; n]; k];

    for d in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (table.scores[a][d], table.scores[b][d]);
            match table.direction {
                Direction::HigherBetter => y.partial_cmp(&x).unwrap(),
                Direction::LowerBetter => x.partial_cmp(&y).unwrap(),
            }
        });
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && table.scores[order[j + 1]][d] == table.scores[order[i]][d] {
                j += 1;
            }
            let midrank = (i + 1 + j + 1) as f64 / 2.0;
            for &m in &order[i..=j] {
                ranks[m][d] = midrank;
            }
            i = j + 1;
        }
    }

    let average_ranks = ranks.iter().map(|row| row.iter().sum::<f64>() / n as f64).collect();
    RankTable { ranks, average_ranks }
}

/// Upper tail of the chi-squared distribution with `dof` degrees of freedom,
/// via the regularized incomplete gamma function.
pub fn chi_squared_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0)
}

/// Two-sided tail probability of the standard normal.
fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Friedman chi-square statistic and its upper-tail p-value with k-1 degrees
/// of freedom. A fully tied table degenerates to (0, 1).
pub fn friedman_test(ranks: &RankTable, n_datasets: usize, n_methods: usize) -> (f64, f64) {
    let (n, k) = (n_datasets as f64, n_methods as f64);
    let sum_sq: f64 = ranks.average_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * n / (k * (k + 1.0))) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
    let statistic = statistic.max(0.0);
    if statistic == 0.0 {
        return (0.0, 1.0);
    }
    (statistic, chi_squared_sf(statistic, n_methods - 1))
}

/// One control-vs-method comparison after Holm adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct HolmComparison {
    pub method: String,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub reject_at_0_05: bool,
}

/// Holm step-down comparisons of every method against the control, ordered
/// by ascending raw p-value.
pub fn holm_posthoc(
    ranks: &RankTable,
    methods: &[String],
    control: usize,
    n_datasets: usize,
) -> Result<Vec<HolmComparison>, StatsError> {
    let k = methods.len();
    if control >= k {
        return Err(StatsError::UnknownControl(format!("index {control}")));
    }
    let se = (k as f64 * (k as f64 + 1.0) / (6.0 * n_datasets as f64)).sqrt();

    let mut comparisons: Vec<(usize, f64, f64)> = methods
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != control)
        .map(|(i, _)| {
            let z = (ranks.average_ranks[control] - ranks.average_ranks[i]) / se;
            (i, z, normal_two_sided_p(z))
        })
        .collect();
    comparisons.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));

    let m = comparisons.len();
    let mut running_max: f64 = 0.0;
    Ok(comparisons
        .into_iter()
        .enumerate()
        .map(|(j, (i, z, p_raw))| {
            let stepped = ((m - j) as f64 * p_raw).min(1.0);
            running_max = running_max.max(stepped);
            HolmComparison {
                method: methods[i].clone(),
                z,
                p_raw,
                p_adjusted: running_max,
                reject_at_0_05: running_max < 0.05,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(methods: &[&str], datasets: usize, scores: Vec<Vec<f64>>, dir: Direction) -> ScoreTable {
        ScoreTable::new(
            methods.iter().map(|s| s.to_string()).collect(),
            (0..datasets).map(|d| format!("d{d}")).collect(),
            scores,
            dir,
        )
        .unwrap()
    }

    #[test]
    fn strictly_better_method_ranks_first() {
        let t = table(
            &["a", "b"],
            2,
            vec![vec![0.9, 0.8], vec![0.5, 0.6]],
            Direction::HigherBetter,
        );
        let r = average_ranks(&t);
        assert_eq!(r.average_ranks, vec![1.0, 2.0]);
    }

    #[test]
    fn all_tied_scores_give_midrank() {
        let t = table(
            &["a", "b", "c"],
            2,
            vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]],
            Direction::HigherBetter,
        );
        let r = average_ranks(&t);
        for avg in r.average_ranks {
            assert_eq!(avg, 2.0); // (k+1)/2
        }
    }

    #[test]
    fn rank_columns_sum_to_k_formula() {
        let t = table(
            &["a", "b", "c", "d"],
            3,
            vec![
                vec![1.0, 2.0, 2.0],
                vec![2.0, 2.0, 1.0],
                vec![3.0, 1.0, 1.0],
                vec![3.0, 4.0, 4.0],
            ],
            Direction::LowerBetter,
        );
        let r = average_ranks(&t);
        for d in 0..3 {
            let sum: f64 = (0..4).map(|m| r.ranks[m][d]).sum();
            assert_eq!(sum, 10.0); // k(k+1)/2 with k=4
        }
    }

    #[test]
    fn direction_flip_with_negated_scores_is_identity() {
        let scores = vec![vec![0.3, 0.9, 0.2], vec![0.5, 0.1, 0.2], vec![0.4, 0.4, 0.8]];
        let t1 = table(&["a", "b", "c"], 3, scores.clone(), Direction::HigherBetter);
        let negated = scores.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
        let t2 = table(&["a", "b", "c"], 3, negated, Direction::LowerBetter);
        assert_eq!(average_ranks(&t1), average_ranks(&t2));
    }

    #[test]
    fn monotone_transform_leaves_ranks_unchanged() {
        let scores = vec![vec![0.3, 0.9], vec![0.5, 0.1], vec![0.4, 0.4]];
        let t1 = table(&["a", "b", "c"], 2, scores.clone(), Direction::HigherBetter);
        let transformed = scores
            .iter()
            .map(|row| row.iter().map(|v| v.exp()).collect())
            .collect();
        let t2 = table(&["a", "b", "c"], 2, transformed, Direction::HigherBetter);
        let (s1, _) = friedman_test(&average_ranks(&t1), 2, 3);
        let (s2, _) = friedman_test(&average_ranks(&t2), 2, 3);
        assert_eq!(s1, s2);
    }

    #[test]
    fn friedman_degenerate_when_all_tie() {
        let t = table(
            &["a", "b"],
            2,
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            Direction::HigherBetter,
        );
        let r = average_ranks(&t);
        let (stat, p) = friedman_test(&r, 2, 2);
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn friedman_fixed_ranks_statistic_eight() {
        // Ranks (1,2,3) on each of 4 datasets: statistic is
        // 12*4/(3*4) * (14 - 12) = 8, and the chi-squared tail with 2
        // degrees of freedom is exp(-4).
        let t = table(
            &["a", "b", "c"],
            4,
            vec![
                vec![1.0, 1.0, 1.0, 1.0],
                vec![2.0, 2.0, 2.0, 2.0],
                vec![3.0, 3.0, 3.0, 3.0],
            ],
            Direction::LowerBetter,
        );
        let r = average_ranks(&t);
        assert_eq!(r.average_ranks, vec![1.0, 2.0, 3.0]);
        let (stat, p) = friedman_test(&r, 4, 3);
        assert!((stat - 8.0).abs() < 1e-12);
        assert!((p - (-4.0f64).exp()).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn chi_squared_tail_against_closed_forms() {
        // dof 2: sf(x) = exp(-x/2).
        for x in [0.5, 1.0, 3.0, 8.0, 20.0] {
            assert!((chi_squared_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-10);
        }
        // dof 4: sf(x) = exp(-x/2) * (1 + x/2).
        for x in [0.5, 2.0, 7.0] {
            let expected = (-x / 2.0f64).exp() * (1.0 + x / 2.0);
            assert!((chi_squared_sf(x, 4) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn holm_identical_rank_not_rejected() {
        let t = table(
            &["ctrl", "same", "worse"],
            4,
            vec![
                vec![0.9, 0.8, 0.9, 0.8],
                vec![0.9, 0.8, 0.9, 0.8],
                vec![0.1, 0.1, 0.1, 0.1],
            ],
            Direction::HigherBetter,
        );
        let r = average_ranks(&t);
        let out = holm_posthoc(&r, &t.methods, 0, 4).unwrap();
        assert_eq!(out.len(), 2);
        let same = out.iter().find(|c| c.method == "same").unwrap();
        assert_eq!(same.z, 0.0);
        assert_eq!(same.p_adjusted, 1.0);
        assert!(!same.reject_at_0_05);
    }

    #[test]
    fn holm_with_two_methods_is_unadjusted() {
        let t = table(
            &["a", "b"],
            6,
            vec![vec![1.0; 6], vec![2.0; 6]],
            Direction::LowerBetter,
        );
        let r = average_ranks(&t);
        let out = holm_posthoc(&r, &t.methods, 0, 6).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].p_raw, out[0].p_adjusted);
    }

    #[test]
    fn holm_adjusted_monotone_and_at_least_raw() {
        let t = table(
            &["a", "b", "c", "d"],
            5,
            vec![
                vec![0.9, 0.9, 0.9, 0.9, 0.9],
                vec![0.7, 0.8, 0.6, 0.9, 0.7],
                vec![0.5, 0.4, 0.6, 0.5, 0.4],
                vec![0.1, 0.2, 0.1, 0.3, 0.2],
            ],
            Direction::HigherBetter,
        );
        let r = average_ranks(&t);
        let out = holm_posthoc(&r, &t.methods, 0, 5).unwrap();
        for pair in out.windows(2) {
            assert!(pair[1].p_adjusted >= pair[0].p_adjusted);
        }
        for c in &out {
            assert!(c.p_adjusted >= c.p_raw);
        }
    }

    #[test]
    fn score_table_rejects_degenerate_shapes() {
        assert!(matches!(
            ScoreTable::new(vec!["a".into()], vec!["d".into(), "e".into()], vec![vec![1.0, 2.0]], Direction::HigherBetter),
            Err(StatsError::TooSmall { .. })
        ));
        assert!(matches!(
            ScoreTable::new(
                vec!["a".into(), "b".into()],
                vec!["d".into(), "e".into()],
                vec![vec![1.0, 2.0], vec![1.0]],
                Direction::HigherBetter
            ),
            Err(StatsError::MissingCells)
        ));
        assert!(matches!(
            ScoreTable::new(
                vec!["a".into(), "b".into()],
                vec!["d".into(), "e".into()],
                vec![vec![1.0, 2.0], vec![1.0, f64::NAN]],
                Direction::HigherBetter
            ),
            Err(StatsError::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn fixture_binary_table_loads() {
        let path = crate::fixtures::dir().join("table5_binary.csv");
        let t = ScoreTable::from_csv(&path, Direction::HigherBetter).unwrap();
        assert_eq!(t.n_methods(), 9);
        assert_eq!(t.n_datasets(), 16);
        assert_eq!(t.methods[0], "AutoSkl_1h");
    }
}
