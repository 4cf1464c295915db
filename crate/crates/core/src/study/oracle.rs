//! Simulated participants for desk-scale runs.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::belief::{Elicitation, InputRecord, Signal};
use crate::corpus::{Label, TokenizedReview};
use crate::explainer::Explanation;
use crate::selector::{DisplayState, SelectiveExplanation};
use crate::seed::rng_for;

/// Judges a word relevant iff it is in `lexicon`, then flips each judgement
/// with probability `noise_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleAnnotator {
    pub lexicon: BTreeSet<String>,
    pub noise_rate: f64,
    pub seed: u64,
}

impl OracleAnnotator {
    pub fn new(lexicon: impl IntoIterator<Item = String>, noise_rate: f64, seed: u64) -> OracleAnnotator {
        assert!((0.0..1.0).contains(&noise_rate), "noise rate must be in [0, 1)");
        OracleAnnotator {
            lexicon: lexicon.into_iter().collect(),
            noise_rate,
            seed,
        }
    }
}

/// Input records for each review, in review order.
///
/// Open-ended input selects every unique word judged relevant. Critique
/// input agrees or disagrees with each of the review's keywords, so an
/// explanation must exist for every review. Timestamps count up from
/// `start_ts` by one per record.
pub fn simulate_input(
    oracle: &OracleAnnotator,
    reviews: &[&TokenizedReview],
    explanations: &BTreeMap<String, Explanation>,
    elicitation: Elicitation,
    session_id: &str,
    start_ts: u64,
) -> Result<Vec<InputRecord>, StudyError> {
    let mut out = Vec::new();
    for review in reviews {
        let doc_id = review.id();
        let mut rng = rng_for(oracle.seed, &format!("oracle/{session_id}/{doc_id}"));
        let mut judge = |word: &str| {
            let relevant = oracle.lexicon.contains(word);
            let flip = oracle.noise_rate > 0.0 && rng.random_bool(oracle.noise_rate);
            relevant != flip
        };
        let mut push = |word: &str, signal: Signal| {
            out.push(InputRecord {
                session_id: session_id.to_string(),
                doc_id: doc_id.to_string(),
                word: word.to_string(),
                signal,
                elicitation,
                timestamp: start_ts,
            })
        };
        match elicitation {
            Elicitation::OpenEnded => {
                for word in review.unique_words() {
                    if judge(word) {
                        push(word, Signal::Selected);
                    }
                }
            }
            Elicitation::Critique => {
                let expl = explanations.get(doc_id).ok_or_else(|| StudyError::Missing {
                    what: "explanation",
                    doc_id: doc_id.to_string(),
                })?;
                for word in expl.keywords() {
                    let signal = if judge(word) { Signal::Agree } else { Signal::Disagree };
                    push(word, signal);
                }
            }
        }
    }
    for (i, r) in out.iter_mut().enumerate() {
        r.timestamp = start_ts + i as u64;
    }
    Ok(out)
}

/// A simulated task-phase participant: answers with the direction that has
/// more highlighted occurrences and falls back to the AI label on a tie.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighlightFollower;

impl HighlightFollower {
    pub fn decide(&self, rendering: &SelectiveExplanation, ai_label: Label) -> Label {
        let (mut pos, mut neg) = (0usize, 0usize);
        for s in &rendering.states {
            if let DisplayState::Highlighted { direction, intensity } = s {
                let w = *intensity as usize;
                match direction {
                    Label::Positive => pos += w,
                    Label::Negative => neg += w,
                }
            }
        }
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => Label::Positive,
            std::cmp::Ordering::Less => Label::Negative,
            std::cmp::Ordering::Equal => ai_label,
        }
    }
}
