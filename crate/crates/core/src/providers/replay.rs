//! Replay provider: serves completions recorded in a trajectory file, so a
//! run can be reproduced byte-for-byte from its own transcript.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::read_trajectories;
use crate::providers::{CompletionRequest, PromptRole, Provider};

#[derive(Debug)]
pub struct ReplayProvider {
    completions: HashMap<(String, u32, PromptRole), String>,
    tag: String,
}

impl ReplayProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let trajectories = read_trajectories(path)?;
        let mut completions = HashMap::new();
        for t in &trajectories {
            for rec in &t.iterations {
                let candidate_role = if rec.index == 0 {
                    PromptRole::Initial
                } else {
                    PromptRole::Refinement
                };
                completions.insert(
                    (t.sample_id.clone(), rec.index, candidate_role),
                    rec.candidate_text.clone(),
                );
                completions.insert(
                    (t.sample_id.clone(), rec.index, PromptRole::Feedback),
                    rec.feedback_text.clone(),
                );
            }
        }
        Ok(ReplayProvider {
            completions,
            tag: format!("replay:{}", path.display()),
        })
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        if request.index != 0 {
            return Err(Error::ReplayKey { key: request.key() });
        }
        self.completions
            .get(&(request.sample_id.clone(), request.iteration, request.role))
            .cloned()
            .ok_or_else(|| Error::ReplayKey { key: request.key() })
    }

    fn tag(&self) -> String {
        self.tag.clone()
    }
}
