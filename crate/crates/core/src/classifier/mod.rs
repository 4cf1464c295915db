//! The black-box sentiment classifier that explanations approximate.

mod reference;
mod remote;

pub use reference::{train_reference, ReferenceClassifier, ReferenceConfig};
pub use remote::{PredictRequest, PredictResponse, RemoteClassifier, REMOTE_TIMEOUT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Label};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains only {0} examples")]
    SingleClass(Label),
    #[error("cannot evaluate accuracy on an empty document list")]
    EmptyEvaluation,
    #[error("remote classifier: {0}")]
    Remote(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Model output for one text. `label` is always `from_prob(prob_positive)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub prob_positive: f64,
}

impl Prediction {
    pub fn from_prob(prob_positive: f64) -> Prediction {
        let prob_positive = prob_positive.clamp(0.0, 1.0);
        Prediction {
            label: Label::from_prob(prob_positive),
            prob_positive,
        }
    }
}

/// Anything that maps texts to P(positive). Results are in input order.
pub trait BlackBoxClassifier: Send + Sync {
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError>;
}

impl<T: BlackBoxClassifier + ?Sized> BlackBoxClassifier for Box<T> {
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError> {
        (**self).predict_proba(texts)
    }
}

impl<T: BlackBoxClassifier + ?Sized> BlackBoxClassifier for std::sync::Arc<T> {
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError> {
        (**self).predict_proba(texts)
    }
}

pub fn predict<C: BlackBoxClassifier + ?Sized>(clf: &C, text: &str) -> Result<Prediction, ClassifierError> {
    let probs = clf.predict_proba(&[text.to_string()])?;
    let p = probs
        .first()
        .copied()
        .ok_or_else(|| ClassifierError::Remote("empty prediction batch".into()))?;
    Ok(Prediction::from_prob(p))
}

pub fn predict_batch<C: BlackBoxClassifier + ?Sized>(clf: &C, texts: &[String]) -> Result<Vec<Prediction>, ClassifierError> {
    Ok(clf.predict_proba(texts)?.into_iter().map(Prediction::from_prob).collect())
}

/// Fraction of documents whose predicted label equals the groundtruth.
pub fn evaluate_accuracy<C: BlackBoxClassifier + ?Sized>(clf: &C, docs: &[Document]) -> Result<f64, ClassifierError> {
    if docs.is_empty() {
        return Err(ClassifierError::EmptyEvaluation);
    }
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let preds = predict_batch(clf, &texts)?;
    let correct = preds.iter().zip(docs).filter(|(p, d)| p.label == d.label).count();
    Ok(correct as f64 / docs.len() as f64)
}
