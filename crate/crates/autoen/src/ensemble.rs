//! Validation-ranked greedy ensemble construction over a pipeline portfolio.
//!
//! The workflow: split the data 60/20/20 (stratified), optionally pre-filter
//! the portfolio on a small stratified subsample under a per-pipeline time
//! budget (economy mode), fit every surviving pipeline on the train part and
//! rank by validation score, then grow a fixed-size ensemble greedily with
//! replacement. The first member is the top-ranked pipeline; each further
//! step appends the candidate whose inclusion gives the best score of the
//! uniform probability average over the cached validation predictions. The
//! unique members are then refitted once on train+validation, and the
//! ensemble predicts by multiplicity-weighted probability averaging.
//!
//! Determinism: ties in ranking and selection break toward the lower
//! pipeline id, and every pipeline is fitted with a derived seed of
//! `config seed XOR pipeline id`, so results are independent of the number
//! of worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_holdout, subsample, Dataset, DatasetError, Frame};
use crate::learners::{LearnerError, ProbabilityMatrix};
use crate::metrics::{Metric, MetricError};
use crate::pipeline::{fit_pipeline, FitPartition, FittedPipeline, PipelineError, Portfolio};

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("every pipeline failed to fit or score; first failure: {first}")]
    AllPipelinesFailed { first: String },
    #[error("economy filter removed every pipeline")]
    AllPipelinesFiltered,
    #[error("no candidates available for greedy selection")]
    EmptyCandidateSet,
    #[error("ensemble size must be at least 1")]
    ZeroEnsembleSize,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("model io error at {path}: {source}")]
    ModelIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model serialization error: {0}")]
    ModelFormat(String),
    #[error("unsupported model format version {got}, expected {expected}")]
    ModelVersion { got: u32, expected: u32 },
}

/// Economy-mode settings: probe every pipeline on a stratified subsample of
/// the train part and drop the ones that error or overrun the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyConfig {
    pub sample_fraction: f64,
    pub per_pipeline_budget_secs: f64,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        EconomyConfig { sample_fraction: 0.10, per_pipeline_budget_secs: 36.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoEnConfig {
    pub ensemble_size: usize,
    pub fractions: (f64, f64, f64),
    pub economy: Option<EconomyConfig>,
    pub metric: Metric,
    pub seed: u64,
    /// When set, return the best-scoring prefix of the greedy trace instead
    /// of the full fixed-size multiset.
    pub best_prefix_mode: bool,
}

impl Default for AutoEnConfig {
    fn default() -> Self {
        AutoEnConfig {
            ensemble_size: 50,
            fractions: (0.6, 0.2, 0.2),
            economy: None,
            metric: Metric::LogLoss,
            seed: 0,
            best_prefix_mode: false,
        }
    }
}

/// One pipeline's position in the validation ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPipeline {
    pub spec_id: u32,
    pub validation_score: f64,
    pub rank: usize,
}

/// A pipeline that failed during ranking or probing, with its diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFailure {
    pub spec_id: u32,
    pub message: String,
}

/// Ranking result: ordered ranking, cached validation predictions of the
/// survivors, and diagnostics for the failures.
#[derive(Debug, Clone)]
pub struct RankingOutcome {
    pub ranked: Vec<RankedPipeline>,
    pub valid_probs: BTreeMap<u32, ProbabilityMatrix>,
    pub failures: Vec<PipelineFailure>,
}

/// Derives the per-pipeline seed from the run seed.
fn pipeline_seed(seed: u64, spec_id: u32) -> u64 {
    seed ^ u64::from(spec_id)
}

/// Fits every portfolio pipeline on `train`, scores it on `valid`, and sorts
/// best-first (ties toward the lower id). Pipelines that error are excluded
/// and recorded, never fatal unless nothing survives.
pub fn rank_pipelines(
    portfolio: &Portfolio,
    train: &Dataset,
    valid: &Dataset,
    metric: Metric,
    seed: u64,
) -> Result<RankingOutcome, EnsembleError> {
    let results: Vec<Result<(u32, f64, ProbabilityMatrix), PipelineFailure>> = portfolio
        .pipelines()
        .par_iter()
        .map(|spec| {
            let spec = spec.reseeded(pipeline_seed(seed, spec.id));
            let attempt = fit_pipeline(&spec, train, FitPartition::TrainOnly)
                .map_err(|e| e.to_string())
                .and_then(|fitted| {
                    fitted.predict_proba(valid).map_err(|e| e.to_string())
                })
                .and_then(|probs| {
                    metric
                        .score(&probs, valid.labels())
                        .map(|score| (score, probs))
                        .map_err(|e| e.to_string())
                });
            match attempt {
                Ok((score, probs)) => Ok((spec.id, score, probs)),
                Err(message) => Err(PipelineFailure { spec_id: spec.id, message }),
            }
        })
        .collect();

    let mut scored = Vec::new();
    let mut failures = Vec::new();
    let mut valid_probs = BTreeMap::new();
    for r in results {
        match r {
            Ok((id, score, probs)) => {
                scored.push((id, score));
                valid_probs.insert(id, probs);
            }
            Err(f) => failures.push(f),
        }
    }
    if scored.is_empty() {
        let first = failures
            .first()
            .map(|f| format!("pipeline {}: {}", f.spec_id, f.message))
            .unwrap_or_else(|| "empty portfolio".into());
        return Err(EnsembleError::AllPipelinesFailed { first });
    }

    scored.sort_by(|a, b| {
        if metric.better(a.1, b.1) {
            std::cmp::Ordering::Less
        } else if metric.better(b.1, a.1) {
            std::cmp::Ordering::Greater
        } else {
            a.0.cmp(&b.0)
        }
    });
    let ranked = scored
        .into_iter()
        .enumerate()
        .map(|(i, (spec_id, validation_score))| RankedPipeline {
            spec_id,
            validation_score,
            rank: i + 1,
        })
        .collect();
    Ok(RankingOutcome { ranked, valid_probs, failures })
}

/// One greedy step: which pipeline was appended and the validation score of
/// the ensemble after the addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub spec_id: u32,
    pub validation_score: f64,
    pub cumulative_seconds: f64,
}

/// Greedy forward selection with replacement from cached validation
/// predictions. Returns the member sequence and the full trace; in
/// best-prefix mode the members are the earliest best-scoring trace prefix.
pub fn greedy_select(
    ranked: &[RankedPipeline],
    valid_probs: &BTreeMap<u32, ProbabilityMatrix>,
    valid_labels: &[usize],
    metric: Metric,
    ensemble_size: usize,
    best_prefix_mode: bool,
) -> Result<(Vec<u32>, Vec<TraceStep>), EnsembleError> {
    greedy_select_timed(
        ranked,
        valid_probs,
        valid_labels,
        metric,
        ensemble_size,
        best_prefix_mode,
        Instant::now(),
    )
}

fn greedy_select_timed(
    ranked: &[RankedPipeline],
    valid_probs: &BTreeMap<u32, ProbabilityMatrix>,
    valid_labels: &[usize],
    metric: Metric,
    ensemble_size: usize,
    best_prefix_mode: bool,
    start: Instant,
) -> Result<(Vec<u32>, Vec<TraceStep>), EnsembleError> {
    if ensemble_size == 0 {
        return Err(EnsembleError::ZeroEnsembleSize);
    }
    let first = ranked.first().ok_or(EnsembleError::EmptyCandidateSet)?;
    if valid_probs.is_empty() {
        return Err(EnsembleError::EmptyCandidateSet);
    }
    // Candidates are the ranked survivors; all must have cached predictions
    // of identical shape.
    let shape = valid_probs
        .get(&first.spec_id)
        .ok_or(EnsembleError::EmptyCandidateSet)?
        .data()
        .dim();
    for r in ranked {
        match valid_probs.get(&r.spec_id) {
            Some(p) if p.data().dim() == shape => {}
            _ => return Err(EnsembleError::EmptyCandidateSet),
        }
    }

    let mut members = vec![first.spec_id];
    let mut sum = valid_probs[&first.spec_id].data().clone();
    let initial = ProbabilityMatrix::new(sum.clone())?;
    let mut trace = vec![TraceStep {
        step: 1,
        spec_id: first.spec_id,
        validation_score: metric.score(&initial, valid_labels)?,
        cumulative_seconds: start.elapsed().as_secs_f64(),
    }];

    // Candidate scan in ascending id order; replacement only on a strictly
    // better score keeps ties at the lower id.
    let mut candidate_ids: Vec<u32> = valid_probs.keys().copied().collect();
    candidate_ids.sort_unstable();

    for t in 2..=ensemble_size {
        let mut best: Option<(u32, f64)> = None;
        for &id in &candidate_ids {
            let mut avg = sum.clone();
            avg += valid_probs[&id].data();
            avg.mapv_inplace(|v| v / t as f64);
            let score = metric.score(&ProbabilityMatrix::new(avg)?, valid_labels)?;
            if best.as_ref().is_none_or(|(_, s)| metric.better(score, *s)) {
                best = Some((id, score));
            }
        }
        let (chosen, score) = best.expect("candidate set is non-empty");
        members.push(chosen);
        sum += valid_probs[&chosen].data();
        trace.push(TraceStep {
            step: t,
            spec_id: chosen,
            validation_score: score,
            cumulative_seconds: start.elapsed().as_secs_f64(),
        });
    }

    if best_prefix_mode {
        let mut best_idx = 0;
        for (i, step) in trace.iter().enumerate() {
            if metric.better(step.validation_score, trace[best_idx].validation_score) {
                best_idx = i;
            }
        }
        members.truncate(best_idx + 1);
    }
    Ok((members, trace))
}

/// Probe outcome for one pipeline during economy filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub spec_id: u32,
    pub n_probe_rows: usize,
    pub seconds: f64,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutcome {
    Kept,
    OverBudget,
    Failed(String),
}

const ECONOMY_SALT: u64 = 0x45434F4E;

/// Fits every pipeline on a stratified subsample of the train part (split
/// 75/25 into reduced train/validation) and keeps, in original order, the
/// ones that finish fit+score within the per-pipeline budget.
///
/// Probes run sequentially so each wall-time measurement is unaffected by
/// sibling pipelines.
pub fn economy_filter(
    portfolio: &Portfolio,
    train: &Dataset,
    cfg: &AutoEnConfig,
) -> Result<(Portfolio, Vec<ProbeRecord>), EnsembleError> {
    let economy = cfg.economy.clone().unwrap_or_default();
    let reduced = subsample(train, economy.sample_fraction, cfg.seed ^ ECONOMY_SALT)?;
    let (train_idx, valid_idx) = crate::dataset::stratified_two_way(
        reduced.labels(),
        reduced.n_classes(),
        0.75,
        cfg.seed ^ ECONOMY_SALT,
    )?;
    let probe_train = reduced.take(&train_idx);
    let probe_valid = reduced.take(&valid_idx);

    let mut records = Vec::with_capacity(portfolio.len());
    let mut kept = BTreeSet::new();
    for spec in portfolio.pipelines() {
        let spec_seeded = spec.reseeded(pipeline_seed(cfg.seed, spec.id));
        let started = Instant::now();
        let attempt = fit_pipeline(&spec_seeded, &probe_train, FitPartition::TrainOnly)
            .map_err(|e| e.to_string())
            .and_then(|fitted| fitted.predict_proba(&probe_valid).map_err(|e| e.to_string()))
            .and_then(|probs| {
                cfg.metric.score(&probs, probe_valid.labels()).map_err(|e| e.to_string())
            });
        let seconds = started.elapsed().as_secs_f64();
        let outcome = match attempt {
            Err(message) => ProbeOutcome::Failed(message),
            Ok(_) if seconds > economy.per_pipeline_budget_secs => ProbeOutcome::OverBudget,
            Ok(_) => {
                kept.insert(spec.id);
                ProbeOutcome::Kept
            }
        };
        records.push(ProbeRecord {
            spec_id: spec.id,
            n_probe_rows: reduced.n_rows(),
            seconds,
            outcome,
        });
    }
    if kept.is_empty() {
        return Err(EnsembleError::AllPipelinesFiltered);
    }
    let filtered = portfolio.retain_ids(&kept)?;
    Ok((filtered, records))
}

pub(crate) const MODEL_FORMAT_VERSION: u32 = 1;

/// The fitted ensemble: member multiset (selection order), unique members
/// refitted on train+validation, the greedy trace, and run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    format_version: u32,
    members: Vec<u32>,
    unique_fitted: BTreeMap<u32, FittedPipeline>,
    trace: Vec<TraceStep>,
    class_names: Vec<String>,
    metric: Metric,
    total_wall_seconds: f64,
    warnings: Vec<String>,
}

impl EnsembleModel {
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    /// Member multiplicities by pipeline id; the values sum to the ensemble
    /// size.
    pub fn multiplicities(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for &id in &self.members {
            *m.entry(id).or_insert(0) += 1;
        }
        m
    }

    pub fn unique_fitted(&self) -> &BTreeMap<u32, FittedPipeline> {
        &self.unique_fitted
    }

    pub fn trace(&self) -> &[TraceStep] {
        &self.trace
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.total_wall_seconds
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Multiplicity-weighted mean of the unique members' predictions.
    pub fn predict_proba(&self, data: &Dataset) -> Result<ProbabilityMatrix, EnsembleError> {
        let predictions = self.member_predictions(|p| p.predict_proba(data))?;
        self.average(&predictions)
    }

    /// Same as [`predict_proba`](Self::predict_proba) for feature-only frames.
    pub fn predict_proba_frame(&self, frame: &Frame) -> Result<ProbabilityMatrix, EnsembleError> {
        let predictions = self.member_predictions(|p| p.predict_proba_frame(frame))?;
        self.average(&predictions)
    }

    fn member_predictions<F>(
        &self,
        predict: F,
    ) -> Result<BTreeMap<u32, ProbabilityMatrix>, EnsembleError>
    where
        F: Fn(&FittedPipeline) -> Result<ProbabilityMatrix, PipelineError>,
    {
        self.unique_fitted
            .iter()
            .map(|(&id, fitted)| Ok((id, predict(fitted)?)))
            .collect()
    }

    fn average(
        &self,
        predictions: &BTreeMap<u32, ProbabilityMatrix>,
    ) -> Result<ProbabilityMatrix, EnsembleError> {
        let multiplicities = self.multiplicities();
        let weighted: Vec<(&ProbabilityMatrix, f64)> = multiplicities
            .iter()
            .map(|(id, &count)| (&predictions[id], count as f64))
            .collect();
        Ok(ProbabilityMatrix::weighted_mean(&weighted)?)
    }

    /// Greedy trace as CSV: step, pipeline id, validation score, cumulative
    /// wall seconds since the run started.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,spec_id,validation_score,cumulative_seconds\n");
        for s in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.step, s.spec_id, s.validation_score, s.cumulative_seconds
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        let wrap_io = |source: std::io::Error| EnsembleError::ModelIo {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(wrap_io)?;
        let writer = std::io::BufWriter::new(file);
        serde_json::to_writer(writer, self).map_err(|e| EnsembleError::ModelFormat(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<EnsembleModel, EnsembleError> {
        let wrap_io = |source: std::io::Error| EnsembleError::ModelIo {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(wrap_io)?;
        let reader = std::io::BufReader::new(file);
        let model: EnsembleModel =
            serde_json::from_reader(reader).map_err(|e| EnsembleError::ModelFormat(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(EnsembleError::ModelVersion {
                got: model.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

/// End-to-end fit on a whole dataset: stratified 60/20/20 split (the test
/// part is held out untouched), optional economy filter, ranking, greedy
/// selection, and a single refit of each unique member on train+validation.
pub fn autoen_fit(
    data: &Dataset,
    portfolio: &Portfolio,
    cfg: &AutoEnConfig,
) -> Result<EnsembleModel, EnsembleError> {
    let start = Instant::now();
    let split = stratified_holdout(data, cfg.fractions, cfg.seed)?;
    let train = data.take(&split.train_idx);
    let valid = data.take(&split.valid_idx);
    fit_with_parts_timed(&train, &valid, portfolio, cfg, start)
}

/// End-to-end fit on caller-provided train/validation parts, as used by the
/// benchmark harness.
pub fn autoen_fit_with_parts(
    train: &Dataset,
    valid: &Dataset,
    portfolio: &Portfolio,
    cfg: &AutoEnConfig,
) -> Result<EnsembleModel, EnsembleError> {
    fit_with_parts_timed(train, valid, portfolio, cfg, Instant::now())
}

fn fit_with_parts_timed(
    train: &Dataset,
    valid: &Dataset,
    portfolio: &Portfolio,
    cfg: &AutoEnConfig,
    start: Instant,
) -> Result<EnsembleModel, EnsembleError> {
    let mut warnings = Vec::new();

    let filtered;
    let active = if cfg.economy.is_some() {
        match economy_filter(portfolio, train, cfg) {
            Ok((kept, records)) => {
                let dropped = records
                    .iter()
                    .filter(|r| r.outcome != ProbeOutcome::Kept)
                    .count();
                if dropped > 0 {
                    warnings.push(format!("economy filter dropped {dropped} pipelines"));
                }
                filtered = kept;
                &filtered
            }
            Err(EnsembleError::AllPipelinesFiltered) => {
                warnings.push(
                    "economy filter removed every pipeline; falling back to the full portfolio"
                        .into(),
                );
                portfolio
            }
            Err(other) => return Err(other),
        }
    } else {
        portfolio
    };

    let ranking = rank_pipelines(active, train, valid, cfg.metric, cfg.seed)?;
    for f in &ranking.failures {
        warnings.push(format!("pipeline {} failed: {}", f.spec_id, f.message));
    }
    let (members, trace) = greedy_select_timed(
        &ranking.ranked,
        &ranking.valid_probs,
        valid.labels(),
        cfg.metric,
        cfg.ensemble_size,
        cfg.best_prefix_mode,
        start,
    )?;

    // Refit each distinct member once on train+validation.
    let refit_data = train.vstack(valid)?;
    let unique_ids: Vec<u32> = members.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let unique_fitted: BTreeMap<u32, FittedPipeline> = unique_ids
        .par_iter()
        .map(|&id| {
            let spec = active
                .get(id)
                .expect("member ids come from the active portfolio")
                .reseeded(pipeline_seed(cfg.seed, id));
            fit_pipeline(&spec, &refit_data, FitPartition::TrainPlusValidation)
                .map(|fitted| (id, fitted))
        })
        .collect::<Result<_, _>>()?;

    Ok(EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        members,
        unique_fitted,
        trace,
        class_names: train.class_names().to_vec(),
        metric: cfg.metric,
        total_wall_seconds: start.elapsed().as_secs_f64(),
        warnings,
    })
}
