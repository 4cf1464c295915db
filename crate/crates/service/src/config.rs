//! TOML study configuration.

use std::path::{Path, PathBuf};

use selex_core::corpus::{CorpusFormat, SplitSizes};
use selex_core::explainer::LimeParams;
use selex_core::seed::derive_seed;
use selex_core::study::Condition;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SEED_ENV: &str = "SELEX_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    BadSeedOverride(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub splits: SplitSizes,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub lime: LimeParams,
    #[serde(default)]
    pub embeddings: EmbeddingsSection,
    #[serde(default)]
    pub belief: BeliefSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub artifacts: ArtifactPaths,
    #[serde(default)]
    pub server: ServerSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    pub format: CorpusFormat,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            path: "data/corpus.jsonl".into(),
            format: CorpusFormat::Jsonl,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// L2 penalty of the reference model.
    pub reg_strength: f64,
    /// Query this endpoint instead of the local reference model.
    pub remote_url: Option<String>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            reg_strength: 1.0,
            remote_url: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingsSection {
    pub path: PathBuf,
}

impl Default for EmbeddingsSection {
    fn default() -> Self {
        EmbeddingsSection {
            path: "data/embeddings.txt".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeliefSection {
    pub reg_strength: f64,
    pub gray_unknown: bool,
}

impl Default for BeliefSection {
    fn default() -> Self {
        BeliefSection {
            reg_strength: 1.0,
            gray_unknown: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    #[serde(with = "condition_str")]
    pub condition: Condition,
    #[serde(default = "one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

mod condition_str {
    use selex_core::study::Condition;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Condition, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(c)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Condition, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    /// Seed of the shared fixed task sample; derived from the global seed if unset.
    pub fixed_seed: Option<u64>,
    pub roster: Vec<RosterEntry>,
}

impl Default for StudySection {
    fn default() -> Self {
        let roster = ["control", "open_ended", "critique"]
            .iter()
            .map(|c| RosterEntry {
                condition: c.parse().expect("built-in condition"),
                weight: 1,
            })
            .collect();
        StudySection { fixed_seed: None, roster }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactPaths {
    pub splits: PathBuf,
    pub model: PathBuf,
    pub dev_explanations: PathBuf,
    pub test_explanations: PathBuf,
    pub input_sample: PathBuf,
}

impl Default for ArtifactPaths {
    fn default() -> Self {
        ArtifactPaths {
            splits: "artifacts/splits.json".into(),
            model: "artifacts/classifier.json".into(),
            dev_explanations: "artifacts/explanations_dev.json".into(),
            test_explanations: "artifacts/explanations_test.json".into(),
            input_sample: "artifacts/input_sample.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub store_dir: PathBuf,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
            store_dir: "store".into(),
        }
    }
}

impl Config {
    /// Defaults around a global seed.
    pub fn with_seed(seed: u64) -> Config {
        Config {
            seed,
            corpus: CorpusSection::default(),
            splits: SplitSizes::default(),
            classifier: ClassifierSection::default(),
            lime: LimeParams::default(),
            embeddings: EmbeddingsSection::default(),
            belief: BeliefSection::default(),
            study: StudySection::default(),
            artifacts: ArtifactPaths::default(),
            server: ServerSection::default(),
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file, then apply the seed override from the environment.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Config::parse(&text, path)?;
        config.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(config)
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| ConfigError::BadSeedOverride(v.to_string()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.study.roster.is_empty() || self.study.roster.iter().all(|e| e.weight == 0) {
            return Err(ConfigError::Invalid("study roster needs a condition with positive weight".into()));
        }
        self.lime.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.belief.reg_strength > 0.0 && self.classifier.reg_strength > 0.0) {
            return Err(ConfigError::Invalid("regularization strengths must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out the `server`
    /// section so the same experiment hashes alike wherever it is deployed.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("config is an object").remove("server");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Roster expanded by weight, in declaration order.
    pub fn roster_cycle(&self) -> Vec<Condition> {
        self.study
            .roster
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.condition, e.weight as usize))
            .collect()
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "splits")
    }

    pub fn classifier_seed(&self) -> u64 {
        derive_seed(self.seed, "classifier")
    }

    pub fn lime_seed(&self) -> u64 {
        derive_seed(self.seed, "lime")
    }

    pub fn fixed_task_seed(&self) -> u64 {
        self.study.fixed_seed.unwrap_or_else(|| derive_seed(self.seed, "fixed-task"))
    }

    pub fn session_seed(&self, session_id: &str) -> u64 {
        derive_seed(self.seed, &format!("session/{session_id}"))
    }

    pub fn panel_seed(&self) -> u64 {
        derive_seed(self.seed, "panel")
    }
}
