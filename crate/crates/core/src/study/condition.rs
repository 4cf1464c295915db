use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::belief::Elicitation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionName {
    Control,
    OpenEnded,
    Critique,
    PanelSelective,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Fixed,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    None,
    #[serde(rename = "self")]
    SelfInput,
    Panel,
}

/// An experimental condition. The input source follows from the name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub name: ConditionName,
    pub sampling: Sampling,
}

impl Condition {
    pub fn new(name: ConditionName, sampling: Sampling) -> Condition {
        Condition { name, sampling }
    }

    pub fn input_source(&self) -> InputSource {
        match self.name {
            ConditionName::Control => InputSource::None,
            ConditionName::OpenEnded | ConditionName::Critique => InputSource::SelfInput,
            ConditionName::PanelSelective => InputSource::Panel,
        }
    }

    pub fn elicitation(&self) -> Option<Elicitation> {
        match self.name {
            ConditionName::OpenEnded => Some(Elicitation::OpenEnded),
            ConditionName::Critique => Some(Elicitation::Critique),
            _ => None,
        }
    }

    /// Whether task-phase renderings are selective.
    pub fn is_selective(&self) -> bool {
        self.input_source() != InputSource::None
    }
}

impl ConditionName {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionName::Control => "control",
            ConditionName::OpenEnded => "open_ended",
            ConditionName::Critique => "critique",
            ConditionName::PanelSelective => "panel_selective",
        }
    }
}

impl fmt::Display for ConditionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Fixed => "fixed",
            Sampling::Random => "random",
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.sampling)
    }
}

impl FromStr for ConditionName {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "control" => Ok(ConditionName::Control),
            "open_ended" | "openended" => Ok(ConditionName::OpenEnded),
            "critique" | "critique_based" => Ok(ConditionName::Critique),
            "panel_selective" | "panel" => Ok(ConditionName::PanelSelective),
            _ => Err(StudyError::UnknownCondition(s.to_string())),
        }
    }
}

/// Parses `name` or `name:sampling`; sampling defaults to fixed.
impl FromStr for Condition {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, sampling) = match s.split_once(':') {
            Some((n, "fixed")) => (n, Sampling::Fixed),
            Some((n, "random")) => (n, Sampling::Random),
            Some(_) => return Err(StudyError::UnknownCondition(s.to_string())),
            None => (s, Sampling::Fixed),
        };
        Ok(Condition::new(name.parse()?, sampling))
    }
}
