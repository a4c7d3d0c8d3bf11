//! Pipelines bind a preprocessing chain to one classifier. A portfolio is an
//! ordered list of pipeline specs read from a TOML file; its order fixes
//! deterministic tie-breaking everywhere downstream.
//!
//! Portfolio file format, one `[[pipeline]]` table per entry:
//!
//! ```toml
//! [[pipeline]]
//! id = 0
//! name = "std_knn5"
//! steps = ["impute", "onehot", "standard_scale"]
//! classifier = { kind = "knn", k = 5 }
//! ```
//!
//! Step spellings are those of [`TransformKind::parse`]; classifier tables
//! deserialize into [`ClassifierSpec`] with `kind` selecting the family.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::learners::{self, ClassifierSpec, FittedClassifier, LearnerError, ProbabilityMatrix};
use crate::preprocess::{
    apply_chain_dataset, fit_transform_chain, FittedChain, PreprocessError, TransformKind,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("portfolio parse error: {0}")]
    Parse(String),
    #[error("unknown preprocessing step `{step}` in pipeline {id}")]
    UnknownStep { id: u32, step: String },
    #[error("unknown classifier `{kind}` in pipeline {id}")]
    UnknownClassifier { id: u32, kind: String },
    #[error("duplicate pipeline id {0}")]
    DuplicateId(u32),
    #[error("portfolio has no pipelines")]
    EmptyPortfolio,
    #[error("pipeline {id}: {source}")]
    Preprocess {
        id: u32,
        #[source]
        source: PreprocessError,
    },
    #[error("pipeline {id}: {source}")]
    Learner {
        id: u32,
        #[source]
        source: LearnerError,
    },
}

/// An unfitted pipeline: ordered preprocessing steps plus a classifier spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub id: u32,
    pub name: String,
    pub steps: Vec<TransformKind>,
    pub classifier: ClassifierSpec,
}

impl PipelineSpec {
    /// Copy with the classifier's internal seed replaced (no-op for
    /// seed-free families).
    pub fn reseeded(&self, seed: u64) -> PipelineSpec {
        PipelineSpec { classifier: self.classifier.with_seed(seed), ..self.clone() }
    }
}

/// Ordered, non-empty list of pipeline specs with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pipelines: Vec<PipelineSpec>,
}

impl Portfolio {
    pub fn new(pipelines: Vec<PipelineSpec>) -> Result<Self, PipelineError> {
        if pipelines.is_empty() {
            return Err(PipelineError::EmptyPortfolio);
        }
        let mut seen = BTreeSet::new();
        for p in &pipelines {
            if !seen.insert(p.id) {
                return Err(PipelineError::DuplicateId(p.id));
            }
            p.classifier
                .validate()
                .map_err(|source| PipelineError::Learner { id: p.id, source })?;
        }
        Ok(Portfolio { pipelines })
    }

    pub fn pipelines(&self) -> &[PipelineSpec] {
        &self.pipelines
    }

    pub fn len(&self) -> usize {
        self.pipelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipelines.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&PipelineSpec> {
        self.pipelines.iter().find(|p| p.id == id)
    }

    /// Sub-portfolio keeping only the given ids, in the original order.
    pub fn retain_ids(&self, ids: &BTreeSet<u32>) -> Result<Portfolio, PipelineError> {
        Portfolio::new(
            self.pipelines.iter().filter(|p| ids.contains(&p.id)).cloned().collect(),
        )
    }
}

#[derive(Deserialize)]
struct RawPortfolio {
    #[serde(default)]
    pipeline: Vec<RawPipeline>,
}

#[derive(Deserialize)]
struct RawPipeline {
    id: u32,
    name: String,
    #[serde(default)]
    steps: Vec<String>,
    classifier: toml::Value,
}

/// Parses a portfolio file, rejecting unknown step or classifier names.
pub fn parse_portfolio(path: &Path) -> Result<Portfolio, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_portfolio_str(&text)
}

pub fn parse_portfolio_str(text: &str) -> Result<Portfolio, PipelineError> {
    let raw: RawPortfolio =
        toml::from_str(text).map_err(|e| PipelineError::Parse(e.to_string()))?;
    let mut pipelines = Vec::with_capacity(raw.pipeline.len());
    for rp in raw.pipeline {
        let steps = rp
            .steps
            .iter()
            .map(|s| {
                TransformKind::parse(s).ok_or_else(|| PipelineError::UnknownStep {
                    id: rp.id,
                    step: s.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let kind = rp
            .classifier
            .get("kind")
            .and_then(|v| v.as_str())
            .unwrap_or("<missing kind>")
            .to_string();
        let classifier: ClassifierSpec = rp
            .classifier
            .clone()
            .try_into()
            .map_err(|_| PipelineError::UnknownClassifier { id: rp.id, kind })?;
        pipelines.push(PipelineSpec { id: rp.id, name: rp.name, steps, classifier });
    }
    Portfolio::new(pipelines)
}

/// Which data a pipeline was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitPartition {
    TrainOnly,
    TrainPlusValidation,
}

/// A fitted pipeline: the fitted chain, the fitted classifier, and the tag
/// naming the partition it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec_id: u32,
    pub fitted_steps: FittedChain,
    pub model: FittedClassifier,
    pub fit_partition_tag: FitPartition,
}

/// Fits the chain on `train`, then the classifier on the transformed matrix.
pub fn fit_pipeline(
    spec: &PipelineSpec,
    train: &Dataset,
    tag: FitPartition,
) -> Result<FittedPipeline, PipelineError> {
    let (chain, matrix) = fit_transform_chain(&spec.steps, train)
        .map_err(|source| PipelineError::Preprocess { id: spec.id, source })?;
    let model = learners::fit(&spec.classifier, &matrix, train.labels(), train.n_classes())
        .map_err(|source| PipelineError::Learner { id: spec.id, source })?;
    Ok(FittedPipeline { spec_id: spec.id, fitted_steps: chain, model, fit_partition_tag: tag })
}

impl FittedPipeline {
    /// Transforms and classifies: by definition the composition of
    /// `apply_chain` and the classifier's `predict_proba`.
    pub fn predict_proba(&self, data: &Dataset) -> Result<ProbabilityMatrix, PipelineError> {
        let matrix = self.transform(data)?;
        self.model
            .predict_proba(&matrix)
            .map_err(|source| PipelineError::Learner { id: self.spec_id, source })
    }

    /// The preprocessing half of the composition.
    pub fn transform(&self, data: &Dataset) -> Result<Array2<f64>, PipelineError> {
        apply_chain_dataset(&self.fitted_steps, data)
            .map_err(|source| PipelineError::Preprocess { id: self.spec_id, source })
    }

    pub fn predict_proba_frame(
        &self,
        frame: &crate::dataset::Frame,
    ) -> Result<ProbabilityMatrix, PipelineError> {
        let matrix = crate::preprocess::apply_chain(&self.fitted_steps, frame)
            .map_err(|source| PipelineError::Preprocess { id: self.spec_id, source })?;
        self.model
            .predict_proba(&matrix)
            .map_err(|source| PipelineError::Learner { id: self.spec_id, source })
    }
}
