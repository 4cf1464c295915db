//! Learning which words a recipient considers relevant.
//!
//! Elicited signals ([`InputRecord`]) are turned into a class-balanced set of
//! word embeddings by negative sampling, and a word-level logistic regression
//! (the belief model) generalizes them to unseen words.

mod embeddings;
mod model;
mod records;

pub use embeddings::{EmbeddingTable, EMBEDDING_DIM};
pub use model::{build_training_set, train_belief, BeliefModel, BeliefTrainingSet, Relevance, TrainingMeta};
pub use records::{aggregate_panel, Elicitation, InputRecord, Signal, PANEL_SESSION_ID};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding file line {line}: {message}")]
    EmbeddingLine { line: usize, message: String },
    #[error("panel aggregation needs critique records only; found {0:?}")]
    MixedElicitation(Elicitation),
    #[error("insufficient input: no positive words with embeddings")]
    InsufficientInput,
    #[error("record refers to review {0:?} which was not provided")]
    MissingReview(String),
    #[error("invalid input record: {0}")]
    InvalidRecord(String),
    #[error("belief training set needs both classes (positives {positives}, negatives {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("belief model file: {0}")]
    ModelFile(String),
}
