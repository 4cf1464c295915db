//! LIME keyword explanations and SP-LIME example selection.

mod cache;
mod lime;
mod splime;

pub use cache::{explain_all, CacheEntry, ExplanationCache};
pub use lime::{lime_explain, LimeParams, MASK_KEEP_PROBABILITY};
pub use splime::{coverage, global_importance, splime_select};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, Prediction};

/// Number of keywords kept per explanation.
pub const KEYWORDS_PER_EXPLANATION: usize = 10;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("review {0:?} has no tokens")]
    EmptyReview(String),
    #[error("invalid LIME parameters: {0}")]
    InvalidParams(String),
    #[error("classifier failed while explaining {doc_id:?}: {source}")]
    Classifier {
        doc_id: String,
        #[source]
        source: ClassifierError,
    },
    #[error("SP-LIME pool is empty")]
    EmptyPool,
    #[error("cannot select {k} examples from a pool of {pool}")]
    PoolTooSmall { k: usize, pool: usize },
    #[error("explanation cache: {0}")]
    Cache(String),
}

/// A signed importance: positive pushes toward positive sentiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub word: String,
    pub weight: f64,
}

/// Keyword explanation of one prediction.
///
/// `attributions` holds the top-10 unique words by |weight|, descending, ties
/// broken by the word itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub doc_id: String,
    pub prediction: Prediction,
    pub attributions: Vec<Attribution>,
    pub surrogate_r2: f64,
    pub seed: u64,
}

impl Explanation {
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.attributions.iter().map(|a| a.word.as_str())
    }

    pub fn weight_of(&self, word: &str) -> Option<f64> {
        self.attributions.iter().find(|a| a.word == word).map(|a| a.weight)
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.attributions.iter().map(|a| a.weight.abs()).fold(0.0, f64::max)
    }
}

/// Sort by |weight| descending, then word ascending, and keep the top `n`.
pub(crate) fn top_attributions(mut all: Vec<Attribution>, n: usize) -> Vec<Attribution> {
    all.sort_by(|a, b| {
        b.weight
            .abs()
            .partial_cmp(&a.weight.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    all.truncate(n);
    all
}
