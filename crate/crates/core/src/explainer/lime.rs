//! Text LIME over unique-word masks.
//!
//! Each perturbation keeps every unique word independently with probability
//! 0.5 and deletes *all* occurrences of the dropped words. The classifier's
//! P(positive) on the variants is regressed on the mask bits with a weighted
//! ridge; weights are `exp(−d² / width²)` where `d` is the cosine distance
//! between the binary mask and the all-ones mask.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{top_attributions, Attribution, ExplainError, Explanation, KEYWORDS_PER_EXPLANATION};
use crate::classifier::{BlackBoxClassifier, Prediction};
use crate::corpus::TokenizedReview;
use crate::seed::rng_for;

pub const MASK_KEEP_PROBABILITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeParams {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge_strength: f64,
}

impl Default for LimeParams {
    fn default() -> Self {
        LimeParams {
            n_samples: 1000,
            kernel_width: 0.25,
            ridge_strength: 1.0,
        }
    }
}

impl LimeParams {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.n_samples < 10 {
            return Err(ExplainError::InvalidParams(format!("n_samples must be >= 10, got {}", self.n_samples)));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(ExplainError::InvalidParams(format!("kernel_width must be positive, got {}", self.kernel_width)));
        }
        if !(self.ridge_strength >= 0.0 && self.ridge_strength.is_finite()) {
            return Err(ExplainError::InvalidParams(format!("ridge_strength must be >= 0, got {}", self.ridge_strength)));
        }
        Ok(())
    }
}

/// Proximity of a mask with `kept` of `total` words to the original text.
pub(crate) fn proximity(kept: usize, total: usize, kernel_width: f64) -> f64 {
    let cosine = if kept == 0 { 0.0 } else { (kept as f64 / total as f64).sqrt() };
    let d = 1.0 - cosine;
    (-(d * d) / (kernel_width * kernel_width)).exp()
}

pub(crate) struct SurrogateFit {
    pub coefficients: Vec<f64>,
    pub r2: f64,
}

/// Weighted ridge with an unpenalized intercept, solved on weight-centered data.
pub(crate) fn fit_surrogate(masks: &[Vec<bool>], targets: &[f64], weights: &[f64], ridge: f64) -> SurrogateFit {
    let k = masks.first().map_or(0, Vec::len);
    let total_w: f64 = weights.iter().sum();
    let mut x_mean = vec![0.0; k];
    let mut y_mean = 0.0;
    for ((mask, &y), &w) in masks.iter().zip(targets).zip(weights) {
        for (m, &bit) in x_mean.iter_mut().zip(mask) {
            if bit {
                *m += w;
            }
        }
        y_mean += w * y;
    }
    x_mean.iter_mut().for_each(|m| *m /= total_w);
    y_mean /= total_w;

    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut centered = vec![0.0; k];
    for ((mask, &y), &w) in masks.iter().zip(targets).zip(weights) {
        for j in 0..k {
            centered[j] = if mask[j] { 1.0 } else { 0.0 } - x_mean[j];
        }
        let yc = y - y_mean;
        for a in 0..k {
            let wa = w * centered[a];
            rhs[a] += wa * yc;
            for b in a..k {
                gram[(a, b)] += wa * centered[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += ridge;
    }

    let beta = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(k)),
    };
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((mask, &y), &w) in masks.iter().zip(targets).zip(weights) {
        let fitted = intercept + mask.iter().zip(&coefficients).filter(|(b, _)| **b).map(|(_, c)| c).sum::<f64>();
        ss_res += w * (y - fitted).powi(2);
        ss_tot += w * (y - y_mean).powi(2);
    }
    let r2 = if ss_tot <= 1e-18 * total_w {
        if ss_res <= 1e-18 * total_w {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    SurrogateFit { coefficients, r2 }
}

/// Explain one prediction. Deterministic given `seed`.
///
/// A classifier failure aborts the whole explanation.
pub fn lime_explain<C: BlackBoxClassifier + ?Sized>(
    clf: &C,
    review: &TokenizedReview,
    params: &LimeParams,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    params.validate()?;
    let words = review.unique_words();
    if words.is_empty() {
        return Err(ExplainError::EmptyReview(review.id().to_string()));
    }
    let k = words.len();
    let position: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();

    let mut rng = rng_for(seed, "lime");
    let mut masks = Vec::with_capacity(params.n_samples);
    masks.push(vec![true; k]);
    for _ in 1..params.n_samples {
        masks.push((0..k).map(|_| rng.random_bool(MASK_KEEP_PROBABILITY)).collect::<Vec<bool>>());
    }

    let texts: Vec<String> = masks
        .iter()
        .map(|mask| review.text_without(|w| !mask[position[w]]))
        .collect();
    let probs = clf.predict_proba(&texts).map_err(|source| ExplainError::Classifier {
        doc_id: review.id().to_string(),
        source,
    })?;
    if probs.len() != texts.len() {
        return Err(ExplainError::Classifier {
            doc_id: review.id().to_string(),
            source: crate::classifier::ClassifierError::Remote(format!("{} probabilities for {} texts", probs.len(), texts.len())),
        });
    }

    let weights: Vec<f64> = masks
        .iter()
        .map(|m| proximity(m.iter().filter(|b| **b).count(), k, params.kernel_width))
        .collect();
    let fit = fit_surrogate(&masks, &probs, &weights, params.ridge_strength);

    let all: Vec<Attribution> = words
        .iter()
        .zip(&fit.coefficients)
        .map(|(w, &c)| Attribution {
            word: (*w).to_string(),
            weight: if c.is_finite() { c } else { 0.0 },
        })
        .collect();

    Ok(Explanation {
        doc_id: review.id().to_string(),
        prediction: Prediction::from_prob(probs[0]),
        attributions: top_attributions(all, KEYWORDS_PER_EXPLANATION),
        surrogate_r2: fit.r2,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ClassifierError, ReferenceClassifier};
    use crate::corpus::{Document, Label};

    fn review(text: &str) -> TokenizedReview {
        TokenizedReview::new(Document {
            id: "r".into(),
            text: text.into(),
            label: Label::Positive,
        })
    }

    struct Constant;

    impl BlackBoxClassifier for Constant {
        fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError> {
            Ok(vec![0.5; texts.len()])
        }
    }

    struct Failing;

    impl BlackBoxClassifier for Failing {
        fn predict_proba(&self, _: &[String]) -> Result<Vec<f64>, ClassifierError> {
            Err(ClassifierError::Remote("boom".into()))
        }
    }

    #[test]
    fn proximity_bounds() {
        assert_eq!(proximity(5, 5, 0.25), 1.0);
        let far = proximity(0, 5, 0.25);
        assert!(far > 0.0 && far < 1e-6);
        assert!(proximity(4, 5, 0.25) > proximity(2, 5, 0.25));
    }

    #[test]
    fn transparent_linear_signs() {
        let clf = ReferenceClassifier::from_coefficients([("good", 2.0), ("bad", -3.0), ("the", 0.0)], 0.0);
        let e = lime_explain(&clf, &review("the good the bad"), &LimeParams::default(), 1).unwrap();
        let good = e.weight_of("good").unwrap();
        let bad = e.weight_of("bad").unwrap();
        assert!(good > 0.0 && bad < 0.0, "{e:?}");
        assert!(bad.abs() > good.abs());
        assert_eq!(e.attributions.len(), 3);
        assert_eq!(e.attributions[0].word, "bad");
    }

    #[test]
    fn constant_classifier_has_no_signal() {
        let e = lime_explain(&Constant, &review("one two three four five"), &LimeParams::default(), 3).unwrap();
        assert!(e.attributions.iter().all(|a| a.weight.abs() < 1e-6));
        assert_eq!(e.surrogate_r2, 1.0);
    }

    #[test]
    fn keyword_count_is_capped() {
        let text: String = (0..25).map(|i| format!("w{i} ")).collect();
        let clf = ReferenceClassifier::from_coefficients((0..25).map(|i| (format!("w{i}"), i as f64 * 0.01)), 0.0);
        let e = lime_explain(&clf, &review(&text), &LimeParams::default(), 3).unwrap();
        assert_eq!(e.attributions.len(), 10);
        for pair in e.attributions.windows(2) {
            assert!(pair[0].weight.abs() >= pair[1].weight.abs());
        }
    }

    #[test]
    fn failures_and_bad_params() {
        let params = LimeParams::default();
        assert!(matches!(
            lime_explain(&Failing, &review("a b"), &params, 0),
            Err(ExplainError::Classifier { .. })
        ));
        assert!(matches!(lime_explain(&Constant, &review("..."), &params, 0), Err(ExplainError::EmptyReview(_))));
        let few = LimeParams { n_samples: 5, ..params };
        assert!(matches!(lime_explain(&Constant, &review("a"), &few, 0), Err(ExplainError::InvalidParams(_))));
    }

    #[test]
    fn seed_determinism() {
        let clf = ReferenceClassifier::from_coefficients([("good", 0.7), ("plot", -0.2)], 0.1);
        let r = review("Good plot, good acting and a plot twist");
        let p = LimeParams::default();
        assert_eq!(lime_explain(&clf, &r, &p, 9).unwrap(), lime_explain(&clf, &r, &p, 9).unwrap());
    }

    #[test]
    fn degenerate_design_does_not_crash() {
        // a single word: the design has one column; ridge 0 on collinear data
        let clf = ReferenceClassifier::from_coefficients([("only", 1.0)], 0.0);
        let p = LimeParams { ridge_strength: 0.0, ..LimeParams::default() };
        let e = lime_explain(&clf, &review("only only"), &p, 2).unwrap();
        assert!(e.attributions[0].weight.is_finite());
    }
}
