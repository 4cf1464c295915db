//! Offline preparation steps and the read-only study data built from them.

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use selex_core::belief::{
    aggregate_panel, build_training_set, train_belief, BeliefError, BeliefModel, EmbeddingTable, InputRecord,
};
use selex_core::classifier::{predict_batch, train_reference, BlackBoxClassifier, ClassifierError, ReferenceClassifier};
use selex_core::corpus::{load_corpus, make_splits, CorpusError, Document, Label, SplitManifest, Splits, TokenizedReview};
use selex_core::explainer::{explain_all, ExplainError, Explanation, ExplanationCache, LimeParams};
use selex_core::study::{sample_input_reviews, InputSample, StudyError, TaskCandidate};
use serde::{de::DeserializeOwned, Serialize};
use thiserror::Error;

use crate::config::Config;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error("explanation cache has no entry for {0:?}")]
    MissingExplanation(String),
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let err = |message: String| PipelineError::Artifact {
        path: path.display().to_string(),
        message,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
    }
    let json = serde_json::to_string_pretty(value).map_err(|e| err(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| err(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let err = |message: String| PipelineError::Artifact {
        path: path.display().to_string(),
        message,
    };
    let raw = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&raw).map_err(|e| err(e.to_string()))
}

fn tokenized(docs: &[Document]) -> Vec<TokenizedReview> {
    docs.iter().cloned().map(TokenizedReview::new).collect()
}

pub fn split_step(docs: &[Document], config: &Config) -> Result<Splits, PipelineError> {
    Ok(make_splits(docs, config.splits, config.split_seed())?)
}

pub fn train_step(splits: &Splits, config: &Config) -> Result<ReferenceClassifier, PipelineError> {
    Ok(train_reference(&tokenized(&splits.train), config.classifier.reg_strength, config.classifier_seed())?)
}

/// Accuracy and per-class error counts on a labelled split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitEvaluation {
    pub accuracy: f64,
    pub wrong_positive: usize,
    pub wrong_negative: usize,
}

pub fn evaluate<C: BlackBoxClassifier + ?Sized>(clf: &C, docs: &[Document]) -> Result<SplitEvaluation, PipelineError> {
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let preds = predict_batch(clf, &texts)?;
    let mut eval = SplitEvaluation {
        accuracy: 0.0,
        wrong_positive: 0,
        wrong_negative: 0,
    };
    let mut correct = 0;
    for (d, p) in docs.iter().zip(&preds) {
        match (p.label == d.label, d.label) {
            (true, _) => correct += 1,
            (false, Label::Positive) => eval.wrong_positive += 1,
            (false, Label::Negative) => eval.wrong_negative += 1,
        }
    }
    eval.accuracy = correct as f64 / docs.len().max(1) as f64;
    Ok(eval)
}

pub fn explain_step<C: BlackBoxClassifier + ?Sized>(
    clf: &C,
    docs: &[Document],
    params: &LimeParams,
    config: &Config,
) -> Result<ExplanationCache, PipelineError> {
    let explanations = explain_all(clf, &tokenized(docs), params, config.lime_seed())?;
    Ok(ExplanationCache::from_explanations(&explanations, *params))
}

pub fn input_sample_step(dev: &ExplanationCache, docs: &[Document]) -> Result<InputSample, PipelineError> {
    let truth: BTreeMap<String, Label> = docs.iter().map(|d| (d.id.clone(), d.label)).collect();
    Ok(sample_input_reviews(&dev.explanations(), &truth)?)
}

/// Everything the study engine reads; immutable once built.
#[derive(Clone, Debug)]
pub struct StudyData {
    pub reviews: BTreeMap<String, TokenizedReview>,
    pub dev_explanations: BTreeMap<String, Explanation>,
    pub test_explanations: BTreeMap<String, Explanation>,
    pub embeddings: EmbeddingTable,
    pub input_sample: InputSample,
    pub task_candidates: Vec<TaskCandidate>,
}

impl StudyData {
    pub fn assemble(
        splits: &Splits,
        dev: &ExplanationCache,
        test: &ExplanationCache,
        embeddings: EmbeddingTable,
        input_sample: InputSample,
    ) -> Result<StudyData, PipelineError> {
        let collect = |docs: &[Document], cache: &ExplanationCache| -> Result<BTreeMap<String, Explanation>, PipelineError> {
            docs.iter()
                .map(|d| {
                    cache
                        .get(&d.id)
                        .map(|e| (d.id.clone(), e))
                        .ok_or_else(|| PipelineError::MissingExplanation(d.id.clone()))
                })
                .collect()
        };
        let dev_explanations = collect(&splits.dev, dev)?;
        let test_explanations = collect(&splits.test, test)?;
        let task_candidates = splits
            .test
            .iter()
            .map(|d| TaskCandidate {
                doc_id: d.id.clone(),
                groundtruth: d.label,
                ai_label: test_explanations[&d.id].prediction.label,
            })
            .collect();
        let reviews = splits
            .dev
            .iter()
            .chain(&splits.test)
            .map(|d| (d.id.clone(), TokenizedReview::new(d.clone())))
            .collect();
        Ok(StudyData {
            reviews,
            dev_explanations,
            test_explanations,
            embeddings,
            input_sample,
            task_candidates,
        })
    }

    /// Run every preparation step in memory with the local reference model.
    pub fn build(docs: &[Document], embeddings: EmbeddingTable, config: &Config) -> Result<(StudyData, ReferenceClassifier), PipelineError> {
        let splits = split_step(docs, config)?;
        let clf = train_step(&splits, config)?;
        let dev = explain_step(&clf, &splits.dev, &config.lime, config)?;
        let test = explain_step(&clf, &splits.test, &config.lime, config)?;
        let sample = input_sample_step(&dev, &splits.dev)?;
        Ok((StudyData::assemble(&splits, &dev, &test, embeddings, sample)?, clf))
    }

    /// Load the corpus, embeddings and persisted artifacts named in `config`.
    pub fn load(config: &Config) -> Result<StudyData, PipelineError> {
        let docs = load_corpus(&config.corpus.path, config.corpus.format)?;
        let manifest: SplitManifest = read_json(&config.artifacts.splits)?;
        let splits = Splits::from_manifest(&docs, &manifest)?;
        let dev = ExplanationCache::load(&config.artifacts.dev_explanations)?;
        let test = ExplanationCache::load(&config.artifacts.test_explanations)?;
        let embeddings = EmbeddingTable::load(&config.embeddings.path)?;
        let sample: InputSample = read_json(&config.artifacts.input_sample)?;
        info!(
            "loaded {} dev and {} test explanations, {} embeddings",
            dev.len(),
            test.len(),
            embeddings.len()
        );
        StudyData::assemble(&splits, &dev, &test, embeddings, sample)
    }

    pub fn groundtruth(&self, doc_id: &str) -> Option<Label> {
        self.reviews.get(doc_id).map(|r| r.doc.label)
    }

    pub fn explanation(&self, doc_id: &str) -> Option<&Explanation> {
        self.test_explanations.get(doc_id).or_else(|| self.dev_explanations.get(doc_id))
    }

    pub fn input_reviews(&self) -> Vec<TokenizedReview> {
        self.input_sample.doc_ids.iter().map(|id| self.reviews[id].clone()).collect()
    }

    /// Train a belief model on elicited records over the input-sample reviews.
    pub fn train_belief_model(&self, records: &[InputRecord], seed: u64, reg_strength: f64) -> Result<BeliefModel, PipelineError> {
        let ts = build_training_set(records, &self.input_reviews(), &self.embeddings, seed)?;
        for w in &ts.warnings {
            log::warn!("{w}");
        }
        Ok(train_belief(&ts, reg_strength)?)
    }

    /// Majority-vote the critique records of all participants, then train
    /// one shared model.
    pub fn train_panel_model(&self, critique_records: &[InputRecord], seed: u64, reg_strength: f64) -> Result<BeliefModel, PipelineError> {
        let panel = aggregate_panel(critique_records)?;
        self.train_belief_model(&panel, seed, reg_strength)
    }
}
