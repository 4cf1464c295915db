use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{BeliefError, EmbeddingTable, InputRecord};
use crate::corpus::TokenizedReview;
use crate::optim::{sigmoid, LogisticProblem, SolverOptions, SparseRow};
use crate::seed::rng_for;

/// Balanced word-level training data for the belief model.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefTrainingSet {
    pub positives: Vec<(String, Vec<f64>)>,
    pub negatives: Vec<(String, Vec<f64>)>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Build positives from `selected`/`agree` words and sample as many negatives
/// from the unselected words of the annotated reviews.
///
/// `reviews` are the annotation instances: every word they contain that never
/// received a positive signal and has an embedding is a negative candidate.
/// `disagree` signals only keep a word out of the positives; they are never
/// used as explicit negatives. Words are deduplicated across reviews.
pub fn build_training_set(
    records: &[InputRecord],
    reviews: &[TokenizedReview],
    emb: &EmbeddingTable,
    seed: u64,
) -> Result<BeliefTrainingSet, BeliefError> {
    let by_id: HashMap<&str, &TokenizedReview> = reviews.iter().map(|r| (r.id(), r)).collect();
    if let Some(missing) = records.iter().find(|r| !by_id.contains_key(r.doc_id.as_str())) {
        return Err(BeliefError::MissingReview(missing.doc_id.clone()));
    }

    let signalled: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.signal.is_positive())
        .map(|r| r.word.as_str())
        .collect();
    let positives: Vec<(String, Vec<f64>)> = signalled
        .iter()
        .filter_map(|w| emb.lookup(w).map(|v| (w.to_string(), v.to_vec())))
        .collect();
    if positives.is_empty() {
        return Err(BeliefError::InsufficientInput);
    }

    let pool: Vec<&str> = reviews
        .iter()
        .flat_map(|r| r.tokens.iter().map(|t| t.word.as_str()))
        .filter(|w| !signalled.contains(w) && emb.contains(w))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut warnings = Vec::new();
    let wanted = positives.len();
    let n_neg = wanted.min(pool.len());
    if n_neg < wanted {
        let msg = format!("negative pool has {} words for {} positives; using {}", pool.len(), wanted, n_neg);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut rng = rng_for(seed, "negative-sampling");
    let mut picks = sample(&mut rng, pool.len(), n_neg).into_vec();
    picks.sort_unstable();
    let negatives = picks
        .into_iter()
        .map(|i| (pool[i].to_string(), emb.lookup(pool[i]).expect("pool words have embeddings").to_vec()))
        .collect();

    Ok(BeliefTrainingSet {
        positives,
        negatives,
        seed,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub reg_strength: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Relevant,
    NotRelevant,
    /// The word has no embedding.
    Unknown,
}

/// Word-level logistic regression over embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub training_meta: TrainingMeta,
}

pub fn train_belief(ts: &BeliefTrainingSet, reg_strength: f64) -> Result<BeliefModel, BeliefError> {
    if ts.positives.is_empty() || ts.negatives.is_empty() {
        return Err(BeliefError::SingleClass {
            positives: ts.positives.len(),
            negatives: ts.negatives.len(),
        });
    }
    let dim = ts.positives[0].1.len();
    let rows: Vec<SparseRow> = ts
        .positives
        .iter()
        .chain(&ts.negatives)
        .map(|(_, v)| v.iter().copied().enumerate().collect())
        .collect();
    let targets: Vec<f64> = std::iter::repeat_n(1.0, ts.positives.len())
        .chain(std::iter::repeat_n(0.0, ts.negatives.len()))
        .collect();
    let fit = LogisticProblem {
        rows: &rows,
        targets: &targets,
        n_features: dim,
        reg_strength,
    }
    .solve(SolverOptions::default());
    if !fit.converged {
        log::warn!("belief model stopped after {} iterations, gradient norm {:.3e}", fit.iterations, fit.grad_norm);
    }
    Ok(BeliefModel {
        weights: fit.weights,
        bias: fit.bias,
        threshold: 0.5,
        training_meta: TrainingMeta {
            seed: ts.seed,
            reg_strength,
            n_pos: ts.positives.len(),
            n_neg: ts.negatives.len(),
            iterations: fit.iterations,
            converged: fit.converged,
        },
    })
}

impl BeliefModel {
    pub fn probability(&self, vector: &[f64]) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(vector).map(|(w, x)| w * x).sum::<f64>())
    }

    /// `None` for out-of-vocabulary words.
    pub fn word_probability(&self, word: &str, emb: &EmbeddingTable) -> Option<f64> {
        emb.lookup(word).map(|v| self.probability(v))
    }

    pub fn predict_relevance(&self, word: &str, emb: &EmbeddingTable) -> Relevance {
        match self.word_probability(word, emb) {
            None => Relevance::Unknown,
            Some(p) if p >= self.threshold => Relevance::Relevant,
            Some(_) => Relevance::NotRelevant,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), BeliefError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| BeliefError::ModelFile(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| BeliefError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<BeliefModel, BeliefError> {
        let raw = std::fs::read_to_string(path).map_err(|e| BeliefError::ModelFile(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| BeliefError::ModelFile(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{Elicitation, Signal};
    use crate::corpus::{Document, Label};

    const DIM: usize = 4;

    fn basis(i: usize, scale: f64) -> Vec<f64> {
        let mut v = vec![0.0; DIM];
        v[i] = scale;
        v
    }

    fn selected(doc: &str, word: &str) -> InputRecord {
        InputRecord {
            session_id: "s".into(),
            doc_id: doc.into(),
            word: word.into(),
            signal: Signal::Selected,
            elicitation: Elicitation::OpenEnded,
            timestamp: 0,
        }
    }

    fn review(id: &str, text: &str) -> TokenizedReview {
        TokenizedReview::new(Document {
            id: id.into(),
            text: text.into(),
            label: Label::Positive,
        })
    }

    /// Table where `p*` words sit near +e0, `n*` words near −e0.
    fn clustered_table(n: usize) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(DIM);
        for i in 0..n {
            let jitter = 0.01 * i as f64;
            let mut p = basis(0, 1.0);
            p[1] = jitter;
            t.insert(format!("p{i}"), p);
            let mut q = basis(0, -1.0);
            q[2] = jitter;
            t.insert(format!("n{i}"), q);
        }
        t
    }

    #[test]
    fn five_positives_pool_of_forty() {
        let emb = clustered_table(40);
        let text: String = (0..40).map(|i| format!("n{i} ")).collect::<String>() + "p0 p1 p2 p3 p4";
        let reviews = vec![review("d", &text)];
        let recs: Vec<InputRecord> = (0..5).map(|i| selected("d", &format!("p{i}"))).collect();
        let ts = build_training_set(&recs, &reviews, &emb, 3).unwrap();
        assert_eq!(ts.positives.len(), 5);
        assert_eq!(ts.negatives.len(), 5);
        assert!(ts.warnings.is_empty());
        assert_eq!(ts, build_training_set(&recs, &reviews, &emb, 3).unwrap());
    }

    #[test]
    fn pool_limited_negatives_warn() {
        let emb = clustered_table(10);
        let reviews = vec![review("d", "p0 p1 p2 p3 p4 p5 p6 p7 n0 n1 n2")];
        let recs: Vec<InputRecord> = (0..8).map(|i| selected("d", &format!("p{i}"))).collect();
        let ts = build_training_set(&recs, &reviews, &emb, 0).unwrap();
        assert_eq!(ts.positives.len(), 8);
        assert_eq!(ts.negatives.len(), 3);
        assert_eq!(ts.warnings.len(), 1);
    }

    #[test]
    fn zero_positives_is_insufficient() {
        let emb = clustered_table(3);
        let reviews = vec![review("d", "p0 n0")];
        assert!(matches!(build_training_set(&[], &reviews, &emb, 0), Err(BeliefError::InsufficientInput)));
        // a selected OOV word does not count
        let recs = vec![selected("d", "zxqv")];
        assert!(matches!(build_training_set(&recs, &reviews, &emb, 0), Err(BeliefError::InsufficientInput)));
    }

    #[test]
    fn disagree_words_are_not_negatives_and_oov_is_dropped() {
        let emb = clustered_table(5);
        let reviews = vec![review("d", "p0 p1 n0 n1 zxqv")];
        let mut recs = vec![selected("d", "p0")];
        recs.push(InputRecord {
            signal: Signal::Disagree,
            elicitation: Elicitation::Critique,
            word: "n0".into(),
            ..recs[0].clone()
        });
        recs.push(InputRecord {
            signal: Signal::Agree,
            elicitation: Elicitation::Critique,
            word: "p1".into(),
            ..recs[0].clone()
        });
        let ts = build_training_set(&recs, &reviews, &emb, 1).unwrap();
        let pos: Vec<&str> = ts.positives.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(pos, ["p0", "p1"]);
        // pool = {n0, n1}: n0 stays eligible through random sampling only
        assert_eq!(ts.negatives.len(), 2);
        assert!(ts.negatives.iter().all(|(w, _)| w == "n0" || w == "n1"));
    }

    #[test]
    fn missing_review_is_an_error() {
        let emb = clustered_table(2);
        let recs = vec![selected("nope", "p0")];
        assert!(matches!(build_training_set(&recs, &[], &emb, 0), Err(BeliefError::MissingReview(_))));
    }

    fn synthetic_set() -> BeliefTrainingSet {
        let emb = clustered_table(8);
        BeliefTrainingSet {
            positives: (0..8).map(|i| (format!("p{i}"), emb.lookup(&format!("p{i}")).unwrap().to_vec())).collect(),
            negatives: (0..8).map(|i| (format!("n{i}"), emb.lookup(&format!("n{i}")).unwrap().to_vec())).collect(),
            seed: 0,
            warnings: vec![],
        }
    }

    #[test]
    fn separable_clusters() {
        let ts = synthetic_set();
        let model = train_belief(&ts, 1.0).unwrap();
        assert!(model.training_meta.converged);
        for (_, v) in &ts.positives {
            assert!(model.probability(v) >= 0.5);
        }
        for (_, v) in &ts.negatives {
            assert!(model.probability(v) < 0.5);
        }
        let mut emb = EmbeddingTable::new(DIM);
        emb.insert("centroid", basis(0, 1.0));
        assert_eq!(model.predict_relevance("centroid", &emb), Relevance::Relevant);
        assert_eq!(model.predict_relevance("zxqv", &emb), Relevance::Unknown);
        assert_eq!(model, train_belief(&ts, 1.0).unwrap());
    }

    #[test]
    fn threshold_is_inclusive() {
        let model = BeliefModel {
            weights: vec![0.0; DIM],
            bias: 0.0,
            threshold: 0.5,
            training_meta: TrainingMeta {
                seed: 0,
                reg_strength: 1.0,
                n_pos: 1,
                n_neg: 1,
                iterations: 0,
                converged: true,
            },
        };
        let mut emb = EmbeddingTable::new(DIM);
        emb.insert("w", basis(1, 3.0));
        assert_eq!(model.predict_relevance("w", &emb), Relevance::Relevant);
    }

    #[test]
    fn single_class_set_is_rejected() {
        let mut ts = synthetic_set();
        ts.negatives.clear();
        assert!(matches!(train_belief(&ts, 1.0), Err(BeliefError::SingleClass { .. })));
    }

    #[test]
    fn probability_is_monotone_in_projection() {
        let model = train_belief(&synthetic_set(), 1.0).unwrap();
        let norm: f64 = model.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let dir: Vec<f64> = model.weights.iter().map(|w| w / norm).collect();
        let base = [0.3, -0.2, 0.5, 0.1];
        let mut last = -1.0;
        for step in -10..=10 {
            let t = step as f64 * 0.5;
            let v: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            let p = model.probability(&v);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn model_file_shape() {
        let model = train_belief(&synthetic_set(), 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("belief.json");
        model.save(&path).unwrap();
        let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["weights", "bias", "threshold", "training_meta"] {
            assert!(raw.get(key).is_some());
        }
        assert_eq!(BeliefModel::load(&path).unwrap(), model);
    }
}
