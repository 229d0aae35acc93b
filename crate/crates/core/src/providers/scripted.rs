//! Deterministic scripted provider driven by a JSONL scenario file.
//!
//! Two record shapes:
//!
//! ```text
//! {"sample_id": "s1", "iteration": 0, "role": "initial", "index": 0, "text": "hello"}
//! {"rule": "ladder", "role": "feedback", "params": {"start": -10, "step": 1}}
//! ```
//!
//! Exact entries win over rules; rules apply to every request with a
//! matching role. `index` defaults to 0.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::providers::{CompletionRequest, PromptRole, Provider};

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    sample_id: Option<String>,
    #[serde(default)]
    iteration: Option<u32>,
    #[serde(default)]
    index: Option<u32>,
    role: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    rule: Option<String>,
    #[serde(default)]
    params: Option<Value>,
}

#[derive(Debug, Clone)]
enum Rule {
    /// MQM feedback whose parsed score is `start + step * iteration`:
    /// the text carries that many minor error lines (or `no-error`).
    LadderMqm { start: f64, step: f64 },
    /// Fixed text with `{sample_id}`, `{iteration}`, `{index}` placeholders.
    Text { text: String },
}

#[derive(Debug)]
pub struct ScriptedProvider {
    entries: HashMap<(String, u32, PromptRole, u32), String>,
    rules: Vec<(PromptRole, Rule)>,
    tag: String,
}

/// MQM feedback block carrying `n` minor errors, scoring `-n` when parsed.
pub fn minor_error_block(n: u32) -> String {
    if n == 0 {
        return "no-error".to_string();
    }
    (0..n)
        .map(|i| format!("'e{i}' is a minor accuracy/mistranslation error"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ScriptedProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut provider = ScriptedProvider {
            entries: HashMap::new(),
            rules: Vec::new(),
            tag: format!("scripted:{}", path.display()),
        };
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: RawRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            let role = PromptRole::parse(&record.role).ok_or_else(|| Error::Schema {
                line: lineno + 1,
                message: format!("unknown role '{}'", record.role),
            })?;
            match (record.rule, record.text) {
                (Some(rule), _) => {
                    let params = record.params.unwrap_or(Value::Null);
                    let rule = match rule.as_str() {
                        "ladder" | "ladder_mqm" => Rule::LadderMqm {
                            start: param_f64(&params, "start").ok_or_else(|| Error::Schema {
                                line: lineno + 1,
                                message: "ladder rule needs params.start".into(),
                            })?,
                            step: param_f64(&params, "step").unwrap_or(1.0),
                        },
                        "text" => Rule::Text {
                            text: params
                                .get("text")
                                .and_then(Value::as_str)
                                .ok_or_else(|| Error::Schema {
                                    line: lineno + 1,
                                    message: "text rule needs params.text".into(),
                                })?
                                .to_string(),
                        },
                        other => {
                            return Err(Error::Schema {
                                line: lineno + 1,
                                message: format!("unknown rule '{other}'"),
                            })
                        }
                    };
                    provider.rules.push((role, rule));
                }
                (None, Some(text)) => {
                    let sample_id = record.sample_id.ok_or_else(|| Error::Schema {
                        line: lineno + 1,
                        message: "entry record needs sample_id".into(),
                    })?;
                    let iteration = record.iteration.ok_or_else(|| Error::Schema {
                        line: lineno + 1,
                        message: "entry record needs iteration".into(),
                    })?;
                    provider.entries.insert(
                        (sample_id, iteration, role, record.index.unwrap_or(0)),
                        text,
                    );
                }
                (None, None) => {
                    return Err(Error::Schema {
                        line: lineno + 1,
                        message: "record needs either text or rule".into(),
                    })
                }
            }
        }
        Ok(provider)
    }

    fn apply_rule(rule: &Rule, request: &CompletionRequest) -> String {
        match rule {
            Rule::LadderMqm { start, step } => {
                let score = start + step * request.iteration as f64;
                let n = (-score).round().max(0.0) as u32;
                minor_error_block(n)
            }
            Rule::Text { text } => text
                .replace("{sample_id}", &request.sample_id)
                .replace("{iteration}", &request.iteration.to_string())
                .replace("{index}", &request.index.to_string()),
        }
    }
}

fn param_f64(params: &Value, key: &str) -> Option<f64> {
    params.get(key).and_then(Value::as_f64)
}

impl Provider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let key = (
            request.sample_id.clone(),
            request.iteration,
            request.role,
            request.index,
        );
        if let Some(text) = self.entries.get(&key) {
            return Ok(text.clone());
        }
        for (role, rule) in &self.rules {
            if *role == request.role {
                return Ok(Self::apply_rule(rule, request));
            }
        }
        Err(Error::ScenarioKey { key: request.key() })
    }

    fn tag(&self) -> String {
        self.tag.clone()
    }
}
