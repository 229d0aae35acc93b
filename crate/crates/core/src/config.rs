//! Run configuration captured for provenance: the resolved invocation is
//! hashed and recorded in the report so results can be traced to a config.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::pipeline::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    SelfRefine,
    SelfConsistency,
    BestOfK,
    Paraphrase,
    ExternalFeedback,
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::SelfRefine => "self-refine",
            RunMode::SelfConsistency => "self-consistency",
            RunMode::BestOfK => "best-of-k",
            RunMode::Paraphrase => "paraphrase",
            RunMode::ExternalFeedback => "external-feedback",
        }
    }
}

/// Resolved run invocation. Serialized (canonically, via serde_json) and
/// hashed into `config_hash`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: RunMode,
    pub task: TaskKind,
    pub dataset: String,
    pub iterations: u32,
    pub k: Vec<u32>,
    pub paths: u32,
    pub seed: u64,
    pub workers: usize,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_feedback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_scores: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<String>,
}

impl RunConfig {
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self)?;
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        let digest = hasher.finalize();
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
