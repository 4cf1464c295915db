use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlackBoxClassifier, ClassifierError};
use crate::corpus::{tokenize, Label, TokenizedReview};
use crate::optim::{sigmoid, LogisticProblem, SolverOptions, SparseRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub reg_strength: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bag-of-words logistic regression over word counts.
///
/// Out-of-vocabulary words contribute nothing, so the empty text scores
/// `sigmoid(bias)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct ReferenceClassifier {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    weights: Vec<f64>,
    bias: f64,
    config: ReferenceConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocabulary: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    config: ReferenceConfig,
}

impl From<ReferenceClassifier> for ModelFile {
    fn from(c: ReferenceClassifier) -> Self {
        ModelFile {
            vocabulary: c.vocabulary,
            weights: c.weights,
            bias: c.bias,
            config: c.config,
        }
    }
}

impl TryFrom<ModelFile> for ReferenceClassifier {
    type Error = String;

    fn try_from(m: ModelFile) -> Result<Self, Self::Error> {
        if m.vocabulary.len() != m.weights.len() {
            return Err(format!("{} vocabulary entries but {} weights", m.vocabulary.len(), m.weights.len()));
        }
        let index = m.vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect::<HashMap<_, _>>();
        if index.len() != m.vocabulary.len() {
            return Err("duplicate vocabulary entry".into());
        }
        Ok(ReferenceClassifier {
            vocabulary: m.vocabulary,
            index,
            weights: m.weights,
            bias: m.bias,
            config: m.config,
        })
    }
}

impl ReferenceClassifier {
    /// Build a transparent model from explicit coefficients.
    pub fn from_coefficients<I, S>(coefficients: I, bias: f64) -> ReferenceClassifier
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let sorted: BTreeMap<String, f64> = coefficients.into_iter().map(|(w, c)| (w.into(), c)).collect();
        let (vocabulary, weights): (Vec<String>, Vec<f64>) = sorted.into_iter().unzip();
        let index = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        ReferenceClassifier {
            vocabulary,
            index,
            weights,
            bias,
            config: ReferenceConfig {
                reg_strength: 0.0,
                seed: 0,
                tolerance: 0.0,
                iterations: 0,
                converged: true,
            },
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn config(&self) -> &ReferenceConfig {
        &self.config
    }

    pub fn coefficient(&self, word: &str) -> Option<f64> {
        self.index.get(word).map(|&i| self.weights[i])
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vocabulary.iter().map(String::as_str).zip(self.weights.iter().copied())
    }

    pub fn logit(&self, text: &str) -> f64 {
        self.bias
            + tokenize(text)
                .iter()
                .filter_map(|t| self.index.get(&t.word))
                .map(|&i| self.weights[i])
                .sum::<f64>()
    }

    pub fn prob_positive(&self, text: &str) -> f64 {
        sigmoid(self.logit(text))
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let json = serde_json::to_string(self).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ClassifierError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<ReferenceClassifier, ClassifierError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ClassifierError::ModelFile(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ClassifierError::ModelFile(format!("{}: {e}", path.display())))
    }
}

impl BlackBoxClassifier for ReferenceClassifier {
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError> {
        Ok(texts.iter().map(|t| self.prob_positive(t)).collect())
    }
}

/// Fit the reference model on tokenized training reviews.
///
/// The vocabulary is exactly the set of training words. The solver is
/// deterministic; `seed` is recorded in the config for provenance.
pub fn train_reference(train: &[TokenizedReview], reg_strength: f64, seed: u64) -> Result<ReferenceClassifier, ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let first = train[0].doc.label;
    if train.iter().all(|r| r.doc.label == first) {
        return Err(ClassifierError::SingleClass(first));
    }

    let vocabulary: Vec<String> = train
        .iter()
        .flat_map(|r| r.tokens.iter().map(|t| t.word.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();

    let rows: Vec<SparseRow> = train
        .iter()
        .map(|r| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for t in &r.tokens {
                *counts.entry(index[&t.word]).or_default() += 1.0;
            }
            counts.into_iter().collect()
        })
        .collect();
    let targets: Vec<f64> = train.iter().map(|r| if r.doc.label == Label::Positive { 1.0 } else { 0.0 }).collect();

    let options = SolverOptions::default();
    let fit = LogisticProblem {
        rows: &rows,
        targets: &targets,
        n_features: vocabulary.len(),
        reg_strength,
    }
    .solve(options);
    if !fit.converged {
        log::warn!(
            "reference classifier stopped after {} iterations with gradient norm {:.3e}",
            fit.iterations,
            fit.grad_norm
        );
    }

    Ok(ReferenceClassifier {
        vocabulary,
        index,
        weights: fit.weights,
        bias: fit.bias,
        config: ReferenceConfig {
            reg_strength,
            seed,
            tolerance: options.tolerance,
            iterations: fit.iterations,
            converged: fit.converged,
        },
    })
}
