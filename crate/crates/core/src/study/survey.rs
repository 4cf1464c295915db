use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StudyError;

/// One exit-survey statement, rated on a five-point agreement scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SurveyItem {
    pub key: &'static str,
    pub category: &'static str,
    pub text: &'static str,
    /// Higher agreement means lower workload.
    pub reversed: bool,
}

pub const SURVEY_ITEMS: [SurveyItem; 7] = [
    SurveyItem {
        key: "mental_demand",
        category: "workload",
        text: "I felt that the task was mentally demanding.",
        reversed: false,
    },
    SurveyItem {
        key: "success",
        category: "workload",
        text: "I felt successful accomplishing what I was asked to do.",
        reversed: true,
    },
    SurveyItem {
        key: "negative_emotion",
        category: "workload",
        text: "I was stressed, insecure, discouraged, irritated, and annoyed during the task.",
        reversed: false,
    },
    SurveyItem {
        key: "helpfulness",
        category: "usefulness",
        text: "I find the information provided by the AI helpful for making movie sentiment judgments.",
        reversed: false,
    },
    SurveyItem {
        key: "ease",
        category: "usefulness",
        text: "Overall, the AI's assistance made the tasks easier.",
        reversed: false,
    },
    SurveyItem {
        key: "confidence",
        category: "usefulness",
        text: "If I want to make movie choices, I would feel comfortable using this AI to help me find and read positive/negative reviews.",
        reversed: false,
    },
    SurveyItem {
        key: "understanding",
        category: "understanding",
        text: "I feel I had a good understanding of how the AI makes predictions.",
        reversed: false,
    },
];

/// Ratings from 1 (strongly disagree) to 5 (strongly agree), stored as given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRatings {
    pub mental_demand: u8,
    pub success: u8,
    pub negative_emotion: u8,
    pub helpfulness: u8,
    pub ease: u8,
    pub confidence: u8,
    pub understanding: u8,
}

impl SurveyRatings {
    /// `(key, rating)` in [`SURVEY_ITEMS`] order.
    pub fn entries(&self) -> [(&'static str, u8); 7] {
        [
            ("mental_demand", self.mental_demand),
            ("success", self.success),
            ("negative_emotion", self.negative_emotion),
            ("helpfulness", self.helpfulness),
            ("ease", self.ease),
            ("confidence", self.confidence),
            ("understanding", self.understanding),
        ]
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        match self.entries().into_iter().find(|(_, v)| !(1..=5).contains(v)) {
            Some((item, value)) => Err(StudyError::InvalidRating { item, value }),
            None => Ok(()),
        }
    }

    /// Mean of the three workload items with success reverse-coded.
    pub fn workload(&self) -> f64 {
        (self.mental_demand as f64 + (6 - self.success) as f64 + self.negative_emotion as f64) / 3.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub session_id: String,
    pub ratings: SurveyRatings,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
    pub submitted_at: u64,
}
