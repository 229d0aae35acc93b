//! Text-generation/feedback providers: remote HTTP chat API, deterministic
//! scripted scenarios, and transcript replay.

pub mod http;
pub mod replay;
pub mod scripted;
pub mod template;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use http::HttpProvider;
pub use replay::ReplayProvider;
pub use scripted::ScriptedProvider;
pub use template::{render, PromptRole, PromptTemplate, TemplateSet, SLOT_NAMES};

/// One completion call. `index` distinguishes parallel samples at the same
/// iteration (reasoning paths, best-of-k candidates); it is 0 for single
/// completions.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub sample_id: String,
    pub iteration: u32,
    pub index: u32,
    pub role: PromptRole,
    pub prompt: String,
    pub seed: u64,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn key(&self) -> String {
        format!(
            "({}, {}, {}, {})",
            self.sample_id,
            self.iteration,
            self.role.name(),
            self.index
        )
    }
}

pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
    /// Stable tag recorded in trajectories.
    fn tag(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    Scripted,
    Replay,
}

/// Configuration for one provider. Kind-specific required fields are checked
/// by `validate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Name of the environment variable holding the API credential; the key
    /// itself never appears in files.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Scenario or transcript file for scripted/replay kinds.
    #[serde(default)]
    pub path: Option<String>,
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    250
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.temperature {
            if !(t >= 0.0) {
                return Err(Error::Validation("temperature must be >= 0".into()));
            }
        }
        match self.kind {
            ProviderKind::Http => {
                if self.endpoint.is_none() {
                    return Err(Error::Validation("http provider needs an endpoint".into()));
                }
                if self.model.is_none() {
                    return Err(Error::Validation("http provider needs a model name".into()));
                }
            }
            ProviderKind::Scripted | ProviderKind::Replay => {
                if self.path.is_none() {
                    return Err(Error::Validation(
                        "scripted/replay provider needs a scenario or transcript path".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Builds a provider from a CLI spec string:
/// `scripted:<scenario.jsonl>`, `replay:<trajectories.jsonl>`, or
/// `http:<config.json>`.
pub fn build_provider(spec: &str) -> Result<Box<dyn Provider>> {
    let (kind, path) = spec.split_once(':').ok_or_else(|| {
        Error::Validation(format!(
            "provider spec '{spec}' must look like kind:path (scripted:, replay:, http:)"
        ))
    })?;
    match kind {
        "scripted" => Ok(Box::new(ScriptedProvider::load(Path::new(path))?)),
        "replay" => Ok(Box::new(ReplayProvider::load(Path::new(path))?)),
        "http" => {
            let text = std::fs::read_to_string(path)?;
            let config: ProviderConfig = serde_json::from_str(&text)?;
            config.validate()?;
            Ok(Box::new(HttpProvider::new(config)?))
        }
        other => Err(Error::Validation(format!("unknown provider kind '{other}'"))),
    }
}

/// Deterministic per-sample seed derived from the run seed, stable across
/// platforms and worker schedules.
pub fn derive_seed(run_seed: u64, sample_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(run_seed.to_le_bytes());
    hasher.update(sample_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
