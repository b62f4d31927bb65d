//! End-to-end training and scoring over a corpus, and the checkpoint file
//! that carries a trained model between the two.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{scale_score, Corpus, CorpusError};
use crate::embed::{EmbeddingProvider, ProviderKind};
use crate::features::{featurize, pair_embeddings, FeatureError, FeatureSet};
use crate::model::{predict_score, Forest, ForestConfig, HeadConfig, HeadModel, ModelError};
use crate::persist::atomic_write_faultable;
use crate::splitter::SplitSpec;
use crate::trainer::{fit_with_controller, TrainConfig, TrainError, TrainObserver, TrainReport};

pub const CHECKPOINT_FORMAT: &str = "asag-checkpoint v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the head pipeline needs a provider that embeds answer pairs")]
    PairsRequired,
    #[error("checkpoint expects a {expected}-dimensional {kind} provider, got {got} dimensions")]
    ProviderMismatch {
        kind: ProviderKind,
        expected: usize,
        got: usize,
    },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown pipeline {0:?} (expected head or features-forest)")]
    UnknownPipeline(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    /// Pair embeddings into the regression head under the restart controller.
    Head,
    /// Lexical and vector-similarity features into the tree ensemble.
    FeaturesForest,
}

impl FromStr for PipelineKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(PipelineKind::Head),
            "features-forest" | "forest" => Ok(PipelineKind::FeaturesForest),
            _ => Err(PipelineError::UnknownPipeline(s.to_string())),
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineKind::Head => "head",
            PipelineKind::FeaturesForest => "features-forest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub kind: ProviderKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub pipeline: PipelineKind,
    pub dataset: String,
    pub score_max: f64,
    pub created_at: String,
    pub seed: u64,
    pub provider: ProviderInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_attempt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_set: Option<FeatureSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelPayload {
    Head(HeadModel<f64>),
    Forest(Forest<f64>),
}

/// A trained model with its metadata. Serialised as JSON with shortest
/// round-trip float formatting, so save/load preserves every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: ModelPayload,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, PipelineError> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let raw: Checkpoint = serde_json::from_slice(bytes)?;
        if raw.meta.format != CHECKPOINT_FORMAT {
            return Err(PipelineError::Checkpoint(format!(
                "unsupported format {:?}",
                raw.meta.format
            )));
        }
        if !(raw.meta.score_max.is_finite() && raw.meta.score_max > 0.0) {
            return Err(PipelineError::Checkpoint(
                "score_max must be positive".into(),
            ));
        }
        let model = match raw.model {
            ModelPayload::Head(m) => {
                let m = HeadModel::from_layers(m.config().clone(), m.layers().to_vec())?;
                if m.config().input_dim != raw.meta.provider.dim {
                    return Err(PipelineError::Checkpoint(format!(
                        "head input {} does not match provider dimension {}",
                        m.config().input_dim,
                        raw.meta.provider.dim
                    )));
                }
                ModelPayload::Head(m)
            }
            ModelPayload::Forest(f) => {
                if f.trees().len() != f.config().n_trees {
                    return Err(PipelineError::Checkpoint("tree count mismatch".into()));
                }
                ModelPayload::Forest(f)
            }
        };
        Ok(Self {
            meta: raw.meta,
            model,
        })
    }

    /// Atomic replace of `path`.
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        atomic_write_faultable(path, &self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub head: HeadConfig,
    pub train: TrainConfig,
    /// Two-part train/validation split for the head pipeline.
    pub split: SplitSpec,
    pub forest: ForestConfig,
    pub feature_set: FeatureSet,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            head: HeadConfig::new(1),
            train: TrainConfig::default(),
            split: SplitSpec::train_val(0),
            forest: ForestConfig::default(),
            feature_set: FeatureSet::All,
        }
    }
}

/// Provenance written into the checkpoint. `created_at` is supplied by the
/// caller so that identical runs produce identical files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub dataset: String,
    pub created_at: String,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Present for the head pipeline.
    pub report: Option<TrainReport>,
}

fn scaled_targets(corpus: &Corpus) -> Result<Vec<f64>, PipelineError> {
    corpus
        .gold_scores()?
        .into_iter()
        .map(|s| scale_score(s, corpus.score_max()).map_err(PipelineError::from))
        .collect()
}

/// Whether every question has at least `parts` pairs.
pub fn can_stratify(corpus: &Corpus, parts: usize) -> bool {
    let mut counts = std::collections::HashMap::new();
    for p in corpus.pairs() {
        *counts.entry(p.question_id.as_str()).or_insert(0usize) += 1;
    }
    counts.values().all(|&c| c >= parts)
}

/// Train `kind` on a fully labelled corpus. The head pipeline falls back to
/// an unstratified split when some question is too small to appear in both
/// parts.
pub fn train_pipeline(
    corpus: &Corpus,
    kind: PipelineKind,
    provider: &dyn EmbeddingProvider,
    options: &PipelineOptions,
    run: &RunInfo,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, PipelineError> {
    let y = scaled_targets(corpus)?;
    let info = ProviderInfo {
        kind: provider.kind(),
        dim: provider.dim(),
    };
    let mut meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.to_string(),
        pipeline: kind,
        dataset: run.dataset.clone(),
        score_max: corpus.score_max(),
        created_at: run.created_at.clone(),
        seed: 0,
        provider: info,
        chosen_attempt: None,
        chosen_epoch: None,
        accepted: None,
        stratified: None,
        feature_set: None,
        train_config: None,
    };
    match kind {
        PipelineKind::Head => {
            if !provider.supports_pairs() {
                return Err(PipelineError::PairsRequired);
            }
            let x = pair_embeddings(corpus, provider)?;
            let qids: Vec<&str> = corpus
                .pairs()
                .iter()
                .map(|p| p.question_id.as_str())
                .collect();
            let mut head = options.head.clone();
            head.input_dim = provider.dim();
            let mut split = options.split.clone();
            if split.stratify_by_question && !can_stratify(corpus, split.fractions().len()) {
                split = split.unstratified();
            }
            let (report, model) =
                fit_with_controller(&qids, &x, &y, &head, &options.train, &split, observer)?;
            meta.seed = report.chosen().seed;
            meta.chosen_attempt = Some(report.chosen_attempt);
            meta.chosen_epoch = Some(report.chosen_epoch);
            meta.accepted = Some(report.accepted);
            meta.stratified = Some(split.stratify_by_question);
            meta.train_config = Some(options.train.clone());
            Ok(TrainOutcome {
                checkpoint: Checkpoint {
                    meta,
                    model: ModelPayload::Head(model),
                },
                report: Some(report),
            })
        }
        PipelineKind::FeaturesForest => {
            let set = options.feature_set;
            let m = featurize(corpus, set, set.needs_embeddings().then_some(provider))?;
            let forest = Forest::fit(&m.rows, &y, options.forest.clone())?;
            meta.seed = options.forest.seed;
            meta.feature_set = Some(set);
            Ok(TrainOutcome {
                checkpoint: Checkpoint {
                    meta,
                    model: ModelPayload::Forest(forest),
                },
                report: None,
            })
        }
    }
}

/// Scores on the original scale for every pair of `corpus`, in order.
/// Raw outputs are clipped to `[0, 1]` before descaling.
pub fn score_corpus(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<f64>, PipelineError> {
    let meta = &checkpoint.meta;
    let needs_provider = match (&checkpoint.model, meta.feature_set) {
        (ModelPayload::Head(_), _) => true,
        (ModelPayload::Forest(_), Some(set)) => set.needs_embeddings(),
        (ModelPayload::Forest(_), None) => false,
    };
    if needs_provider && provider.dim() != meta.provider.dim {
        return Err(PipelineError::ProviderMismatch {
            kind: meta.provider.kind,
            expected: meta.provider.dim,
            got: provider.dim(),
        });
    }
    let raw: Vec<f64> = match &checkpoint.model {
        ModelPayload::Head(model) => {
            if !provider.supports_pairs() {
                return Err(PipelineError::PairsRequired);
            }
            pair_embeddings(corpus, provider)?
                .iter()
                .map(|x| model.predict(x))
                .collect::<Result<_, _>>()?
        }
        ModelPayload::Forest(forest) => {
            let set = meta.feature_set.unwrap_or(FeatureSet::All);
            featurize(corpus, set, set.needs_embeddings().then_some(provider))?
                .rows
                .iter()
                .map(|x| forest.predict(x))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(raw
        .into_iter()
        .map(|r| predict_score(r, meta.score_max))
        .collect())
}
