use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::corpus::Label;

/// One task-phase judgement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub session_id: String,
    pub doc_id: String,
    pub human_label: Label,
    pub ai_label: Label,
    pub groundtruth: Label,
    /// Time between serving the review and receiving the decision.
    pub elapsed_ms: u64,
}

impl Decision {
    pub fn agrees(&self) -> bool {
        self.human_label == self.ai_label
    }

    pub fn ai_correct(&self) -> bool {
        self.ai_label == self.groundtruth
    }

    pub fn human_correct(&self) -> bool {
        self.human_label == self.groundtruth
    }
}

/// The 2×2 table of human agreement against AI correctness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Appropriate reliance.
    pub agree_ai_correct: usize,
    /// Over-reliance.
    pub agree_ai_wrong: usize,
    /// Under-reliance.
    pub disagree_ai_correct: usize,
    /// Appropriate self-reliance.
    pub disagree_ai_wrong: usize,
}

impl CellCounts {
    pub fn add(&mut self, d: &Decision) {
        match (d.agrees(), d.ai_correct()) {
            (true, true) => self.agree_ai_correct += 1,
            (true, false) => self.agree_ai_wrong += 1,
            (false, true) => self.disagree_ai_correct += 1,
            (false, false) => self.disagree_ai_wrong += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.agree_ai_correct + self.agree_ai_wrong + self.disagree_ai_correct + self.disagree_ai_wrong
    }

    pub fn ai_correct(&self) -> usize {
        self.agree_ai_correct + self.disagree_ai_correct
    }

    pub fn ai_wrong(&self) -> usize {
        self.agree_ai_wrong + self.disagree_ai_wrong
    }

    pub fn agreements(&self) -> usize {
        self.agree_ai_correct + self.agree_ai_wrong
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_decisions: usize,
    pub accuracy: f64,
    pub reliance: f64,
    /// Agreement rate among AI-wrong decisions.
    pub over_reliance: Option<f64>,
    /// Disagreement rate among AI-correct decisions.
    pub under_reliance: Option<f64>,
    /// Share of all decisions that agree with a correct AI.
    pub appropriate_agreement: f64,
    /// Share of all decisions that reject a wrong AI.
    pub appropriate_disagreement: f64,
    pub total_task_ms: u64,
    pub cells: CellCounts,
}

pub fn compute_metrics(decisions: &[Decision]) -> Result<MetricsReport, StudyError> {
    if decisions.is_empty() {
        return Err(StudyError::NoDecisions);
    }
    let mut cells = CellCounts::default();
    for d in decisions {
        cells.add(d);
    }
    let n = cells.total() as f64;
    let correct = decisions.iter().filter(|d| d.human_correct()).count();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(MetricsReport {
        n_decisions: decisions.len(),
        accuracy: correct as f64 / n,
        reliance: cells.agreements() as f64 / n,
        over_reliance: ratio(cells.agree_ai_wrong, cells.ai_wrong()),
        under_reliance: ratio(cells.disagree_ai_correct, cells.ai_correct()),
        appropriate_agreement: cells.agree_ai_correct as f64 / n,
        appropriate_disagreement: cells.disagree_ai_wrong as f64 / n,
        total_task_ms: decisions.iter().map(|d| d.elapsed_ms).sum(),
        cells,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` if either side is empty.
pub fn ranking_auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in positives {
        for q in negatives {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Some(wins / (positives.len() * negatives.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    fn d(human: Label, ai: Label, truth: Label) -> Decision {
        Decision {
            session_id: "s".into(),
            doc_id: "d".into(),
            human_label: human,
            ai_label: ai,
            groundtruth: truth,
            elapsed_ms: 10,
        }
    }

    #[test]
    fn over_reliance_on_wrong_cases() {
        // AI says N, truth P: agreeing means answering N
        let mut log: Vec<_> = (0..4).map(|_| d(N, N, P)).collect();
        log.extend((0..6).map(|_| d(P, N, P)));
        let m = compute_metrics(&log).unwrap();
        assert_eq!(m.over_reliance, Some(0.4));
        assert_eq!(m.under_reliance, None);
        assert_eq!(m.total_task_ms, 100);
    }

    #[test]
    fn always_correct_human() {
        let mut log: Vec<_> = (0..10).map(|_| d(P, P, P)).collect();
        log.extend((0..10).map(|_| d(N, P, N)));
        let m = compute_metrics(&log).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.reliance, 0.5);
        assert_eq!(m.over_reliance, Some(0.0));
        assert_eq!(m.under_reliance, Some(0.0));
    }

    #[test]
    fn empty_log_is_error() {
        assert!(matches!(compute_metrics(&[]), Err(StudyError::NoDecisions)));
    }

    #[test]
    fn auc_basics() {
        assert_eq!(ranking_auc(&[0.9, 0.8], &[0.1, 0.2]), Some(1.0));
        assert_eq!(ranking_auc(&[0.1], &[0.9]), Some(0.0));
        assert_eq!(ranking_auc(&[0.5], &[0.5]), Some(0.5));
        assert_eq!(ranking_auc(&[], &[0.5]), None);
    }
}
