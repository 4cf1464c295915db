use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lime_explain, Attribution, ExplainError, Explanation, LimeParams};
use crate::classifier::{BlackBoxClassifier, Prediction};
use crate::corpus::{Label, TokenizedReview};
use crate::seed::derive_seed;

/// One cached explanation in its on-disk shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prob_positive: f64,
    pub label: Label,
    pub attributions: Vec<(String, f64)>,
    pub surrogate_r2: f64,
    pub seed: u64,
    pub params: LimeParams,
}

/// Write-once map from doc id to explanation for one split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplanationCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl ExplanationCache {
    pub fn from_explanations(explanations: &[Explanation], params: LimeParams) -> ExplanationCache {
        let entries = explanations
            .iter()
            .map(|e| {
                (
                    e.doc_id.clone(),
                    CacheEntry {
                        prob_positive: e.prediction.prob_positive,
                        label: e.prediction.label,
                        attributions: e.attributions.iter().map(|a| (a.word.clone(), a.weight)).collect(),
                        surrogate_r2: e.surrogate_r2,
                        seed: e.seed,
                        params,
                    },
                )
            })
            .collect();
        ExplanationCache { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.entries.contains_key(doc_id)
    }

    pub fn get(&self, doc_id: &str) -> Option<Explanation> {
        self.entries.get(doc_id).map(|c| Explanation {
            doc_id: doc_id.to_string(),
            prediction: Prediction {
                label: c.label,
                prob_positive: c.prob_positive,
            },
            attributions: c
                .attributions
                .iter()
                .map(|(w, x)| Attribution { word: w.clone(), weight: *x })
                .collect(),
            surrogate_r2: c.surrogate_r2,
            seed: c.seed,
        })
    }

    /// All explanations in doc-id order.
    pub fn explanations(&self) -> Vec<Explanation> {
        self.entries.keys().filter_map(|id| self.get(id)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), ExplainError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| ExplainError::Cache(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ExplainError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<ExplanationCache, ExplainError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ExplainError::Cache(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ExplainError::Cache(format!("{}: {e}", path.display())))
    }
}

/// Explain every review in parallel; each review's RNG is keyed by
/// `(global_seed, doc_id)`, so the result does not depend on scheduling.
pub fn explain_all<C: BlackBoxClassifier + ?Sized>(
    clf: &C,
    reviews: &[TokenizedReview],
    params: &LimeParams,
    global_seed: u64,
) -> Result<Vec<Explanation>, ExplainError> {
    reviews
        .par_iter()
        .map(|r| lime_explain(clf, r, params, derive_seed(global_seed, r.id())))
        .collect()
}
