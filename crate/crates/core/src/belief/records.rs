use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BeliefError;

pub const PANEL_SESSION_ID: &str = "panel";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Selected,
    Agree,
    Disagree,
}

impl Signal {
    /// Selected and agree both assert relevance.
    pub fn is_positive(self) -> bool {
        matches!(self, Signal::Selected | Signal::Agree)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elicitation {
    OpenEnded,
    Critique,
}

/// One elicited signal about one word in one review.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub session_id: String,
    pub doc_id: String,
    pub word: String,
    pub signal: Signal,
    pub elicitation: Elicitation,
    /// Milliseconds since the Unix epoch (or a simulated clock).
    pub timestamp: u64,
}

impl InputRecord {
    /// Check the signal/elicitation pairing and, for critiques, that the word
    /// is one of the review's keywords.
    pub fn validate<'a, I>(&self, keywords: I) -> Result<(), BeliefError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        match (self.elicitation, self.signal) {
            (Elicitation::OpenEnded, Signal::Selected) => Ok(()),
            (Elicitation::Critique, Signal::Agree | Signal::Disagree) => {
                if keywords.into_iter().any(|k| k == self.word) {
                    Ok(())
                } else {
                    Err(BeliefError::InvalidRecord(format!(
                        "{:?} is not a keyword of review {:?}",
                        self.word, self.doc_id
                    )))
                }
            }
            (e, s) => Err(BeliefError::InvalidRecord(format!("signal {s:?} is not valid for {e:?} elicitation"))),
        }
    }
}

/// Majority vote per `(doc_id, word)` over critique records.
///
/// Strictly more agrees gives `agree`; anything else, ties included, gives
/// `disagree`. Output is sorted by `(doc_id, word)` and carries the session
/// id `"panel"` and the latest timestamp of its group.
pub fn aggregate_panel(records: &[InputRecord]) -> Result<Vec<InputRecord>, BeliefError> {
    if let Some(bad) = records.iter().find(|r| r.elicitation != Elicitation::Critique) {
        return Err(BeliefError::MixedElicitation(bad.elicitation));
    }
    // (agrees, disagrees, latest timestamp)
    let mut votes: BTreeMap<(&str, &str), (usize, usize, u64)> = BTreeMap::new();
    for r in records {
        let v = votes.entry((r.doc_id.as_str(), r.word.as_str())).or_default();
        match r.signal {
            Signal::Agree => v.0 += 1,
            Signal::Disagree => v.1 += 1,
            Signal::Selected => {
                return Err(BeliefError::InvalidRecord(format!("selected signal in critique record for {:?}", r.word)));
            }
        }
        v.2 = v.2.max(r.timestamp);
    }
    Ok(votes
        .into_iter()
        .map(|((doc_id, word), (agree, disagree, ts))| InputRecord {
            session_id: PANEL_SESSION_ID.to_string(),
            doc_id: doc_id.to_string(),
            word: word.to_string(),
            signal: if agree > disagree { Signal::Agree } else { Signal::Disagree },
            elicitation: Elicitation::Critique,
            timestamp: ts,
        })
        .collect())
}
