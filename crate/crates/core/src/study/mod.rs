//! The experimental protocol: conditions, session phases, review sampling,
//! simulated annotators, decisions, surveys and reliance metrics.

mod condition;
mod metrics;
mod oracle;
mod reports;
mod sampling;
mod session;
mod survey;

pub use condition::{Condition, ConditionName, InputSource, Sampling};
pub use metrics::{compute_metrics, ranking_auc, CellCounts, Decision, MetricsReport};
pub use oracle::{simulate_input, HighlightFollower, OracleAnnotator};
pub use reports::{highlight_support_report, top_words_report, HighlightSupport, TopWords};
pub use sampling::{sample_input_reviews, sample_task_reviews, InputSample, TaskCandidate, INPUT_SAMPLE_SIZE, TASK_PER_CELL, TASK_SAMPLE_SIZE};
pub use session::{ItemRef, Phase, PhaseClock, Session};
pub use survey::{SurveyItem, SurveyRatings, SurveyResponse, SURVEY_ITEMS};

use thiserror::Error;

use crate::corpus::Label;
use crate::explainer::ExplainError;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("operation requires phase {expected} but session is in {actual}")]
    WrongPhase { expected: String, actual: Phase },
    #[error("document {0:?} is not assigned to this session phase")]
    UnknownDoc(String),
    #[error("document {0:?} was already answered")]
    Duplicate(String),
    #[error("expected input for {expected:?}, got {got:?}")]
    OutOfOrder { expected: String, got: String },
    #[error("input pool has {pool} explanations, need {needed}")]
    PoolTooSmall { pool: usize, needed: usize },
    #[error("task cell ({groundtruth}, ai {}) has {available} candidates, need {needed}", if *.ai_correct { "correct" } else { "wrong" })]
    CellShort {
        groundtruth: Label,
        ai_correct: bool,
        available: usize,
        needed: usize,
    },
    #[error("no decisions to summarize")]
    NoDecisions,
    #[error("missing {what} for document {doc_id:?}")]
    Missing { what: &'static str, doc_id: String },
    #[error("survey rating {item} = {value} outside 1..=5")]
    InvalidRating { item: &'static str, value: u8 },
    #[error(transparent)]
    Explain(#[from] ExplainError),
}
