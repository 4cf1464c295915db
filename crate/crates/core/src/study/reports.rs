use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::belief::InputRecord;
use crate::corpus::{Label, TokenizedReview};
use crate::explainer::Explanation;
use crate::selector::{supporting_fraction, DisplayState, SelectiveExplanation};

/// Mean supporting fraction per AI-correctness group. Reviews with nothing
/// highlighted are left out of the mean; a group with no defined fraction
/// reports `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighlightSupport {
    pub fraction_when_ai_correct: Option<f64>,
    pub fraction_when_ai_wrong: Option<f64>,
    pub n_ai_correct: usize,
    pub n_ai_wrong: usize,
}

pub fn highlight_support_report(
    task_ids: &[String],
    explanations: &BTreeMap<String, Explanation>,
    renderings: &BTreeMap<String, SelectiveExplanation>,
    groundtruths: &BTreeMap<String, Label>,
) -> Result<HighlightSupport, StudyError> {
    let missing = |what, id: &String| StudyError::Missing { what, doc_id: id.clone() };
    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    for id in task_ids {
        let expl = explanations.get(id).ok_or_else(|| missing("explanation", id))?;
        let rendering = renderings.get(id).ok_or_else(|| missing("rendering", id))?;
        let truth = *groundtruths.get(id).ok_or_else(|| missing("groundtruth", id))?;
        let group = if expl.prediction.label == truth { &mut correct } else { &mut wrong };
        if let Some(f) = supporting_fraction(rendering, truth) {
            group.push(f);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(HighlightSupport {
        fraction_when_ai_correct: mean(&correct),
        fraction_when_ai_wrong: mean(&wrong),
        n_ai_correct: correct.len(),
        n_ai_wrong: wrong.len(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopWords {
    /// Words by number of positive signals.
    pub top_selected: Vec<(String, usize)>,
    /// Words by number of grayed occurrences.
    pub top_misaligned: Vec<(String, usize)>,
}

/// Top `n` selected and misaligned words; ties break alphabetically.
pub fn top_words_report(
    records: &[InputRecord],
    renderings: &[(&SelectiveExplanation, &TokenizedReview)],
    n: usize,
) -> TopWords {
    let mut selected: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.signal.is_positive()) {
        *selected.entry(&r.word).or_default() += 1;
    }
    let mut grayed: BTreeMap<&str, usize> = BTreeMap::new();
    for (rendering, review) in renderings {
        for (state, token) in rendering.states.iter().zip(&review.tokens) {
            if *state == DisplayState::Grayed {
                *grayed.entry(&token.word).or_default() += 1;
            }
        }
    }
    TopWords {
        top_selected: rank(selected, n),
        top_misaligned: rank(grayed, n),
    }
}

fn rank(counts: BTreeMap<&str, usize>, n: usize) -> Vec<(String, usize)> {
    let mut v: Vec<_> = counts.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    // stable sort keeps the alphabetical order of the map within ties
    v.sort_by(|a, b| b.1.cmp(&a.1));
    v.truncate(n);
    v
}
