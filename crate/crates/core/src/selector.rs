//! Per-token display states for original and selective explanations.
//!
//! Keywords are highlighted in the direction of their weight with one of
//! three intensities; in selective mode, keywords the belief model predicts
//! as not relevant are grayed instead. Every occurrence of a word shares one
//! state. Non-keywords are always plain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefModel, EmbeddingTable, Relevance};
use crate::corpus::{Label, TokenizedReview};
use crate::explainer::Explanation;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("explanation is for {explanation:?} but review is {review:?}")]
    DocMismatch { explanation: String, review: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DisplayState {
    /// `intensity` is 1, 2 or 3.
    Highlighted { direction: Label, intensity: u8 },
    Grayed,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    Original,
    Selective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectiveExplanation {
    pub doc_id: String,
    pub mode: RenderMode,
    /// Aligned with the review's tokens.
    pub states: Vec<DisplayState>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Gray keywords that have no embedding instead of keeping them highlighted.
    pub gray_unknown: bool,
}

/// Bucket `|weight| / max|weight|` into thirds: (2/3, 1] → 3, (1/3, 2/3] → 2,
/// [0, 1/3] → 1.
pub fn intensity(weight: f64, max_abs: f64) -> u8 {
    if max_abs <= 0.0 {
        return 1;
    }
    let ratio = weight.abs() / max_abs;
    if ratio > 2.0 / 3.0 {
        3
    } else if ratio > 1.0 / 3.0 {
        2
    } else {
        1
    }
}

/// Zero weights count as positive.
fn direction(weight: f64) -> Label {
    if weight >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Compute display states. `belief = None` renders the original explanation.
pub fn render_states(
    expl: &Explanation,
    review: &TokenizedReview,
    belief: Option<&BeliefModel>,
    emb: &EmbeddingTable,
    options: RenderOptions,
) -> Result<SelectiveExplanation, SelectorError> {
    if expl.doc_id != review.id() {
        return Err(SelectorError::DocMismatch {
            explanation: expl.doc_id.clone(),
            review: review.id().to_string(),
        });
    }
    let max_abs = expl.max_abs_weight();
    let per_word: HashMap<&str, DisplayState> = expl
        .attributions
        .iter()
        .map(|a| {
            let keep = match belief {
                None => true,
                Some(model) => match model.predict_relevance(&a.word, emb) {
                    Relevance::Relevant => true,
                    Relevance::Unknown => !options.gray_unknown,
                    Relevance::NotRelevant => false,
                },
            };
            let state = if keep {
                DisplayState::Highlighted {
                    direction: direction(a.weight),
                    intensity: intensity(a.weight, max_abs),
                }
            } else {
                DisplayState::Grayed
            };
            (a.word.as_str(), state)
        })
        .collect();

    let states = review
        .tokens
        .iter()
        .map(|t| per_word.get(t.word.as_str()).copied().unwrap_or(DisplayState::Plain))
        .collect();
    Ok(SelectiveExplanation {
        doc_id: expl.doc_id.clone(),
        mode: if belief.is_some() { RenderMode::Selective } else { RenderMode::Original },
        states,
    })
}

/// A review rendered with no highlights at all.
pub fn render_plain(review: &TokenizedReview) -> SelectiveExplanation {
    SelectiveExplanation {
        doc_id: review.id().to_string(),
        mode: RenderMode::Original,
        states: vec![DisplayState::Plain; review.tokens.len()],
    }
}

/// Share of highlighted occurrences whose direction matches `groundtruth`.
/// Grayed occurrences count in neither part; `None` if nothing is highlighted.
pub fn supporting_fraction(rendering: &SelectiveExplanation, groundtruth: Label) -> Option<f64> {
    let mut supporting = 0usize;
    let mut highlighted = 0usize;
    for state in &rendering.states {
        if let DisplayState::Highlighted { direction, .. } = state {
            highlighted += 1;
            if *direction == groundtruth {
                supporting += 1;
            }
        }
    }
    (highlighted > 0).then(|| supporting as f64 / highlighted as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireState {
    Highlighted,
    Grayed,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireToken {
    pub surface: String,
    pub span: [usize; 2],
    pub state: WireState,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub direction: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intensity: Option<u8>,
}

/// Rendering payload consumed by the web UI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRendering {
    pub doc_id: String,
    pub mode: RenderMode,
    pub tokens: Vec<WireToken>,
}

impl SelectiveExplanation {
    pub fn to_wire(&self, review: &TokenizedReview) -> WireRendering {
        let tokens = review
            .tokens
            .iter()
            .zip(&self.states)
            .map(|(t, s)| {
                let (state, direction, intensity) = match *s {
                    DisplayState::Highlighted { direction, intensity } => (WireState::Highlighted, Some(direction), Some(intensity)),
                    DisplayState::Grayed => (WireState::Grayed, None, None),
                    DisplayState::Plain => (WireState::Plain, None, None),
                };
                WireToken {
                    surface: t.surface.clone(),
                    span: [t.span.0, t.span.1],
                    state,
                    direction,
                    intensity,
                }
            })
            .collect();
        WireRendering {
            doc_id: self.doc_id.clone(),
            mode: self.mode,
            tokens,
        }
    }

    pub fn grayed_count(&self) -> usize {
        self.states.iter().filter(|s| **s == DisplayState::Grayed).count()
    }
}
