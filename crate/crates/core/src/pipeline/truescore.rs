//! True-score sources: task-computed metrics, external score files, and
//! calibrated proxy scores.

use std::collections::HashMap;

use crate::calibrate::QuantileMap;
use crate::error::{Error, Result};
use crate::pipeline::{TaskPayload, TaskSpec};
use crate::scorers;

/// Produces the true (expected) quality score for one candidate. `key` is
/// the iteration index for refinement runs and the candidate index for
/// best-of-k.
pub trait TrueScorer: Send + Sync {
    fn score(&self, task: &TaskSpec, candidate: &str, key: u32) -> Result<f64>;
}

/// Strict string-matching concept coverage (constrained generation).
pub struct CoverageTrueScorer;

impl TrueScorer for CoverageTrueScorer {
    fn score(&self, task: &TaskSpec, candidate: &str, _key: u32) -> Result<f64> {
        match &task.payload {
            TaskPayload::ConstrainedGen { concepts } => {
                Ok(scorers::coverage_score(candidate, concepts))
            }
            _ => Err(Error::Validation(format!(
                "coverage scorer needs a constrained_gen task, got {}",
                task.kind().name()
            ))),
        }
    }
}

/// Exact match against the gold answer (math). The candidate is an answer
/// string; solutions must have their boxed answer extracted first.
pub struct ExactMatchTrueScorer;

impl TrueScorer for ExactMatchTrueScorer {
    fn score(&self, task: &TaskSpec, candidate: &str, _key: u32) -> Result<f64> {
        match &task.payload {
            TaskPayload::Math { gold_answer, .. } => {
                Ok(scorers::exact_match_score(candidate, gold_answer))
            }
            _ => Err(Error::Validation(format!(
                "exact-match scorer needs a math task, got {}",
                task.kind().name()
            ))),
        }
    }
}

/// Scores keyed by (sample_id, iteration-or-index) loaded from an
/// external-scores file.
pub struct FileScores {
    scores: HashMap<(String, u32), f64>,
}

impl FileScores {
    pub fn new(scores: HashMap<(String, u32), f64>) -> Self {
        FileScores { scores }
    }
}

impl TrueScorer for FileScores {
    fn score(&self, task: &TaskSpec, _candidate: &str, key: u32) -> Result<f64> {
        self.scores
            .get(&(task.id.clone(), key))
            .copied()
            .ok_or_else(|| Error::MissingScore {
                sample_id: task.id.clone(),
                key,
            })
    }
}

/// Proxy metric scores passed through a fitted quantile map.
pub struct CalibratedScores {
    raw: FileScores,
    map: QuantileMap,
}

impl CalibratedScores {
    pub fn new(scores: HashMap<(String, u32), f64>, map: QuantileMap) -> Result<Self> {
        map.validate()?;
        Ok(CalibratedScores {
            raw: FileScores::new(scores),
            map,
        })
    }
}

impl TrueScorer for CalibratedScores {
    fn score(&self, task: &TaskSpec, candidate: &str, key: u32) -> Result<f64> {
        let raw = self.raw.score(task, candidate, key)?;
        self.map.apply(raw)
    }
}

/// MQM annotation text keyed by (sample_id, iteration), parsed and scored
/// with the severity weights (e.g. human annotation exports).
pub struct MqmFileScores {
    annotations: HashMap<(String, u32), String>,
}

impl MqmFileScores {
    pub fn new(annotations: HashMap<(String, u32), String>) -> Self {
        MqmFileScores { annotations }
    }
}

impl TrueScorer for MqmFileScores {
    fn score(&self, task: &TaskSpec, _candidate: &str, key: u32) -> Result<f64> {
        let text = self
            .annotations
            .get(&(task.id.clone(), key))
            .ok_or_else(|| Error::MissingScore {
                sample_id: task.id.clone(),
                key,
            })?;
        Ok(scorers::mqm_score(&scorers::parse_mqm_feedback(text)))
    }
}
