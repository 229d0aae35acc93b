//! JSONL file schemas: task datasets, score pairs, external scores,
//! calibration corpora, and trajectory/selection files.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pipeline::{SelectionRecord, TaskKind, TaskPayload, TaskSpec, Trajectory};
use crate::stats::{ScorePair, ScoreScale};

fn parse_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push((i + 1, record));
    }
    Ok(records)
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Deserialize)]
struct RawTranslationTask {
    id: String,
    source: String,
    reference: String,
    pair: String,
    #[serde(default)]
    external_text: Option<String>,
}

#[derive(Deserialize)]
struct RawConstrainedTask {
    id: String,
    concepts: Vec<String>,
    #[serde(default)]
    external_text: Option<String>,
}

#[derive(Deserialize)]
struct RawMathTask {
    id: String,
    problem: String,
    gold_answer: String,
    #[serde(default)]
    external_text: Option<String>,
}

fn check_duplicates(tasks: &[(usize, TaskSpec)]) -> Result<()> {
    let mut seen = HashSet::new();
    for (line, task) in tasks {
        if !seen.insert(task.id.clone()) {
            return Err(Error::Schema {
                line: *line,
                message: format!("duplicate task id '{}'", task.id),
            });
        }
    }
    Ok(())
}

fn load_tasks_with_external(
    path: &Path,
    kind: TaskKind,
) -> Result<Vec<(usize, TaskSpec, Option<String>)>> {
    let out: Vec<(usize, TaskSpec, Option<String>)> = match kind {
        TaskKind::Translation => parse_jsonl::<RawTranslationTask>(path)?
            .into_iter()
            .map(|(line, raw)| {
                (
                    line,
                    TaskSpec {
                        id: raw.id,
                        payload: TaskPayload::Translation {
                            source: raw.source,
                            reference: raw.reference,
                            pair: raw.pair,
                        },
                    },
                    raw.external_text,
                )
            })
            .collect(),
        TaskKind::ConstrainedGen => parse_jsonl::<RawConstrainedTask>(path)?
            .into_iter()
            .map(|(line, raw)| {
                (
                    line,
                    TaskSpec {
                        id: raw.id,
                        payload: TaskPayload::ConstrainedGen {
                            concepts: raw.concepts,
                        },
                    },
                    raw.external_text,
                )
            })
            .collect(),
        TaskKind::Math => parse_jsonl::<RawMathTask>(path)?
            .into_iter()
            .map(|(line, raw)| {
                (
                    line,
                    TaskSpec {
                        id: raw.id,
                        payload: TaskPayload::Math {
                            problem: raw.problem,
                            gold_answer: raw.gold_answer,
                        },
                    },
                    raw.external_text,
                )
            })
            .collect(),
    };
    let pairs: Vec<(usize, TaskSpec)> = out
        .iter()
        .map(|(line, task, _)| (*line, task.clone()))
        .collect();
    check_duplicates(&pairs)?;
    Ok(out)
}

/// Loads and validates a task dataset; duplicate ids are rejected.
pub fn load_tasks(path: &Path, kind: TaskKind) -> Result<Vec<TaskSpec>> {
    Ok(load_tasks_with_external(path, kind)?
        .into_iter()
        .map(|(_, task, _)| task)
        .collect())
}

/// Loads tasks paired with the `external_text` field required by the
/// paraphrase probe.
pub fn load_paraphrase_items(path: &Path, kind: TaskKind) -> Result<Vec<(TaskSpec, String)>> {
    load_tasks_with_external(path, kind)?
        .into_iter()
        .map(|(line, task, external)| match external {
            Some(text) if !text.is_empty() => Ok((task, text)),
            _ => Err(Error::Schema {
                line,
                message: format!("task '{}' needs a non-empty external_text", task.id),
            }),
        })
        .collect()
}

/// Score-pair schema: {sample_id, iteration, self_score, true_score}.
pub fn ingest_score_pairs(path: &Path, scale: Option<ScoreScale>) -> Result<Vec<ScorePair>> {
    let records: Vec<(usize, ScorePair)> = parse_jsonl(path)?;
    if records.is_empty() {
        return Err(Error::NoSamples);
    }
    records
        .into_iter()
        .map(|(_, pair)| {
            pair.validate(scale)?;
            Ok(pair)
        })
        .collect()
}

#[derive(Deserialize)]
struct RawExternalScore {
    sample_id: String,
    iteration: u32,
    score: f64,
}

/// External-scores schema: {sample_id, iteration, score}.
pub fn load_external_scores(path: &Path) -> Result<HashMap<(String, u32), f64>> {
    let mut scores = HashMap::new();
    for (line, raw) in parse_jsonl::<RawExternalScore>(path)? {
        if !raw.score.is_finite() {
            return Err(Error::Schema {
                line,
                message: format!("non-finite score for sample {}", raw.sample_id),
            });
        }
        scores.insert((raw.sample_id, raw.iteration), raw.score);
    }
    Ok(scores)
}

#[derive(Deserialize)]
struct RawAnnotation {
    sample_id: String,
    iteration: u32,
    annotation: String,
}

/// MQM annotation export: {sample_id, iteration, annotation}.
pub fn load_mqm_annotations(path: &Path) -> Result<HashMap<(String, u32), String>> {
    Ok(parse_jsonl::<RawAnnotation>(path)?
        .into_iter()
        .map(|(_, raw)| ((raw.sample_id, raw.iteration), raw.annotation))
        .collect())
}

#[derive(Deserialize)]
struct RawCalibrationPair {
    metric_score: f64,
    human_score: f64,
}

/// Calibration corpus: {metric_score, human_score} per line. Returns the
/// (source, target) sample vectors.
pub fn load_calibration_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let records: Vec<(usize, RawCalibrationPair)> = parse_jsonl(path)?;
    let mut source = Vec::with_capacity(records.len());
    let mut target = Vec::with_capacity(records.len());
    for (_, raw) in records {
        source.push(raw.metric_score);
        target.push(raw.human_score);
    }
    Ok((source, target))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    Ok(parse_jsonl::<Trajectory>(path)?
        .into_iter()
        .map(|(_, t)| t)
        .collect())
}

fn to_jsonl<T: serde::Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    write_atomic(path, &to_jsonl(trajectories)?)
}

pub fn read_selections(path: &Path) -> Result<Vec<SelectionRecord>> {
    Ok(parse_jsonl::<SelectionRecord>(path)?
        .into_iter()
        .map(|(_, s)| s)
        .collect())
}

pub fn write_selections(path: &Path, selections: &[SelectionRecord]) -> Result<()> {
    write_atomic(path, &to_jsonl(selections)?)
}
