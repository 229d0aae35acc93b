//! Experiment state machines: iterative self-refine with accept-if-improved,
//! self-consistency refinement for math, best-of-k selection, the paraphrase
//! probe, and the external-feedback variant.

mod truescore;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{render, CompletionRequest, PromptRole, Provider, TemplateSet};
use crate::scorers::{self, SelfScorer};
use crate::stats::{bias_stats, BiasStats, ScorePair, ScoreScale};

pub use truescore::{
    CalibratedScores, CoverageTrueScorer, ExactMatchTrueScorer, FileScores, MqmFileScores,
    TrueScorer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Translation,
    ConstrainedGen,
    Math,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Translation => "translation",
            TaskKind::ConstrainedGen => "constrained_gen",
            TaskKind::Math => "math",
        }
    }

    pub fn scale(&self) -> ScoreScale {
        match self {
            TaskKind::Translation => ScoreScale::Mqm,
            TaskKind::ConstrainedGen | TaskKind::Math => ScoreScale::Binary,
        }
    }

    /// Feedback parser matching the task's score scale.
    pub fn self_scorer(&self) -> SelfScorer {
        match self {
            TaskKind::Translation => SelfScorer::Mqm,
            TaskKind::ConstrainedGen => SelfScorer::Coverage,
            TaskKind::Math => SelfScorer::Scalar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskPayload {
    Translation {
        source: String,
        reference: String,
        pair: String,
    },
    ConstrainedGen {
        concepts: Vec<String>,
    },
    Math {
        problem: String,
        gold_answer: String,
    },
}

/// Tagged task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    #[serde(flatten)]
    pub payload: TaskPayload,
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self.payload {
            TaskPayload::Translation { .. } => TaskKind::Translation,
            TaskPayload::ConstrainedGen { .. } => TaskKind::ConstrainedGen,
            TaskPayload::Math { .. } => TaskKind::Math,
        }
    }

    pub fn scale(&self) -> ScoreScale {
        self.kind().scale()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub candidate_text: String,
    pub feedback_text: String,
    pub self_score: f64,
    pub true_score: f64,
    pub accepted: bool,
}

/// Per-sample record of every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_id: String,
    pub task: TaskSpec,
    pub provider_tag: String,
    pub iterations: Vec<IterationRecord>,
    /// Set when a provider failure truncated the run at some iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub self_score: f64,
    pub true_score: f64,
}

/// Outcome of one best-of-k selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub sample_id: String,
    pub k: u32,
    pub candidates: Vec<Candidate>,
    pub selected_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SelectionRecord {
    pub fn selected_pair(&self) -> Option<ScorePair> {
        self.candidates.get(self.selected_index).map(|c| {
            ScorePair::new(self.sample_id.clone(), 0, c.self_score, c.true_score)
        })
    }
}

/// Shared knobs for one run.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub iterations: u32,
    pub seed: u64,
    pub templates: TemplateSet,
    pub self_scorer: SelfScorer,
    /// Decoding temperature for initial generation, feedback and refinement.
    pub temperature: f64,
    /// Decoding temperature for diversity sampling (reasoning paths,
    /// best-of-k candidates).
    pub sampling_temperature: f64,
}

impl RunSettings {
    pub fn new(kind: TaskKind, iterations: u32, seed: u64) -> Self {
        RunSettings {
            iterations,
            seed,
            templates: TemplateSet::default_for(kind),
            self_scorer: kind.self_scorer(),
            temperature: 0.0,
            sampling_temperature: 0.7,
        }
    }
}

fn base_slots(task: &TaskSpec) -> HashMap<String, String> {
    let mut slots = HashMap::new();
    match &task.payload {
        TaskPayload::Translation { source, .. } => {
            slots.insert("source".to_string(), source.clone());
        }
        TaskPayload::ConstrainedGen { concepts } => {
            let quoted: Vec<String> = concepts.iter().map(|c| format!("'{c}'")).collect();
            slots.insert("concepts".to_string(), format!("[{}]", quoted.join(", ")));
        }
        TaskPayload::Math { problem, .. } => {
            slots.insert("problem".to_string(), problem.clone());
        }
    }
    slots
}

struct SampleRunner<'a> {
    task: &'a TaskSpec,
    settings: &'a RunSettings,
    seed: u64,
}

impl<'a> SampleRunner<'a> {
    fn new(task: &'a TaskSpec, settings: &'a RunSettings) -> Self {
        let seed = crate::providers::derive_seed(settings.seed, &task.id);
        SampleRunner {
            task,
            settings,
            seed,
        }
    }

    fn complete(
        &self,
        provider: &dyn Provider,
        role: PromptRole,
        iteration: u32,
        index: u32,
        extra: &[(&str, &str)],
        temperature: f64,
    ) -> Result<String> {
        let template = self.settings.templates.for_role(role)?;
        let mut slots = base_slots(self.task);
        for (k, v) in extra {
            slots.insert(k.to_string(), v.to_string());
        }
        let prompt = render(template, &slots)?;
        provider.complete(&CompletionRequest {
            sample_id: self.task.id.clone(),
            iteration,
            index,
            role,
            prompt,
            seed: self.seed,
            temperature,
        })
    }
}

/// Iterative self-refine: record 0 is the initial generation; each later
/// step refines the previous accepted text conditioned on its feedback, and
/// the refinement is accepted iff its self-score is strictly greater than
/// the current accepted self-score. Provider failures truncate the
/// trajectory with an error marker; partial trajectories are reportable.
pub fn run_self_refine(
    task: &TaskSpec,
    generator: &dyn Provider,
    feedback: &dyn Provider,
    true_scorer: &dyn TrueScorer,
    settings: &RunSettings,
) -> Trajectory {
    let runner = SampleRunner::new(task, settings);
    let mut trajectory = Trajectory {
        sample_id: task.id.clone(),
        task: task.clone(),
        provider_tag: generator.tag(),
        iterations: Vec::new(),
        error: None,
    };

    let step = |iteration: u32,
                accepted_text: &str,
                accepted_feedback: &str|
     -> Result<(String, String, Option<f64>, f64)> {
        let candidate = if iteration == 0 {
            runner.complete(
                generator,
                PromptRole::Initial,
                0,
                0,
                &[],
                settings.temperature,
            )?
        } else {
            runner.complete(
                generator,
                PromptRole::Refinement,
                iteration,
                0,
                &[("previous", accepted_text), ("feedback", accepted_feedback)],
                settings.temperature,
            )?
        };
        let feedback_text = runner.complete(
            feedback,
            PromptRole::Feedback,
            iteration,
            0,
            &[("candidate", &candidate)],
            settings.temperature,
        )?;
        let self_score = settings.self_scorer.score(&feedback_text);
        let true_score = true_scorer.score(task, &candidate, iteration)?;
        Ok((candidate, feedback_text, self_score, true_score))
    };

    let mut accepted_text = String::new();
    let mut accepted_feedback = String::new();
    let mut accepted_self = 0.0;

    for iteration in 0..=settings.iterations {
        match step(iteration, &accepted_text, &accepted_feedback) {
            Ok((candidate, feedback_text, self_score, true_score)) => {
                if iteration == 0 {
                    let self_score = self_score.unwrap_or(0.0);
                    accepted_text = candidate.clone();
                    accepted_feedback = feedback_text.clone();
                    accepted_self = self_score;
                    trajectory.iterations.push(IterationRecord {
                        index: 0,
                        candidate_text: candidate,
                        feedback_text,
                        self_score,
                        true_score,
                        accepted: true,
                    });
                } else {
                    // unusable feedback keeps the prior output
                    let (record_self, accepted) = match self_score {
                        Some(s) => (s, s > accepted_self),
                        None => (accepted_self, false),
                    };
                    trajectory.iterations.push(IterationRecord {
                        index: iteration,
                        candidate_text: candidate.clone(),
                        feedback_text: feedback_text.clone(),
                        self_score: record_self,
                        true_score,
                        accepted,
                    });
                    if accepted {
                        accepted_text = candidate;
                        accepted_feedback = feedback_text;
                        accepted_self = record_self;
                    }
                }
            }
            Err(e) => {
                trajectory.error = Some(format!("iteration {iteration}: {e}"));
                break;
            }
        }
    }
    trajectory
}

/// Same state machine as `run_self_refine`, but the feedback text and the
/// acceptance score come from the external provider; the self-score fields
/// record the external score so the same statistics apply.
pub fn run_external_feedback_refine(
    task: &TaskSpec,
    generator: &dyn Provider,
    external_feedback: &dyn Provider,
    true_scorer: &dyn TrueScorer,
    settings: &RunSettings,
) -> Trajectory {
    run_self_refine(task, generator, external_feedback, true_scorer, settings)
}

/// Self-consistency refinement for math: per iteration, sample `paths`
/// solutions, majority-vote an answer, and replace the current answer when
/// the vote disagrees (self-score 0) or keep it (self-score 1). The true
/// score is exact match against gold each iteration.
pub fn run_self_consistency(
    task: &TaskSpec,
    generator: &dyn Provider,
    paths: u32,
    settings: &RunSettings,
) -> Trajectory {
    let runner = SampleRunner::new(task, settings);
    let gold = match &task.payload {
        TaskPayload::Math { gold_answer, .. } => gold_answer.clone(),
        _ => {
            return Trajectory {
                sample_id: task.id.clone(),
                task: task.clone(),
                provider_tag: generator.tag(),
                iterations: Vec::new(),
                error: Some("self-consistency requires a math task".into()),
            }
        }
    };
    let mut trajectory = Trajectory {
        sample_id: task.id.clone(),
        task: task.clone(),
        provider_tag: generator.tag(),
        iterations: Vec::new(),
        error: None,
    };

    let initial = match runner.complete(
        generator,
        PromptRole::Initial,
        0,
        0,
        &[],
        settings.temperature,
    ) {
        Ok(text) => text,
        Err(e) => {
            trajectory.error = Some(format!("iteration 0: {e}"));
            return trajectory;
        }
    };
    let mut current = scorers::extract_boxed_answer(&initial).unwrap_or_default();
    trajectory.iterations.push(IterationRecord {
        index: 0,
        candidate_text: initial,
        feedback_text: String::new(),
        self_score: 1.0,
        true_score: scorers::exact_match_score(&current, &gold),
        accepted: true,
    });

    for iteration in 1..=settings.iterations {
        let mut answers = Vec::new();
        let mut failed = None;
        for path in 1..=paths {
            match runner.complete(
                generator,
                PromptRole::Initial,
                iteration,
                path,
                &[],
                settings.sampling_temperature,
            ) {
                Ok(solution) => {
                    if let Ok(answer) = scorers::extract_boxed_answer(&solution) {
                        answers.push(answer);
                    }
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            trajectory.error = Some(format!("iteration {iteration}: {e}"));
            break;
        }
        let (feedback_text, self_score) = if answers.is_empty() {
            ("no answer extracted from any reasoning path".to_string(), 0.0)
        } else {
            let (voted, count) = scorers::majority_vote(&answers).unwrap();
            let consistent = scorers::consistency_score(&current, &voted);
            if consistent == 0.0 {
                current = voted.clone();
            }
            (format!("majority answer: {voted} ({count}/{paths})"), consistent)
        };
        trajectory.iterations.push(IterationRecord {
            index: iteration,
            candidate_text: current.clone(),
            feedback_text,
            self_score,
            true_score: scorers::exact_match_score(&current, &gold),
            accepted: true,
        });
    }
    trajectory
}

/// Best-of-k self-rewarding selection: sample k candidates, score each with
/// self-feedback and the true scorer, select argmax self-score (ties go to
/// the lowest index). Candidates whose feedback is unusable are excluded
/// from selection and flagged.
pub fn run_best_of_k(
    task: &TaskSpec,
    generator: &dyn Provider,
    feedback: &dyn Provider,
    true_scorer: &dyn TrueScorer,
    k: u32,
    settings: &RunSettings,
) -> SelectionRecord {
    let runner = SampleRunner::new(task, settings);
    let mut record = SelectionRecord {
        sample_id: task.id.clone(),
        k,
        candidates: Vec::new(),
        selected_index: 0,
        error: None,
    };
    for index in 0..k {
        let candidate = match runner.complete(
            generator,
            PromptRole::Initial,
            0,
            index,
            &[],
            settings.sampling_temperature,
        ) {
            Ok(text) => text,
            Err(e) => {
                record.error = Some(format!("candidate {index}: {e}"));
                break;
            }
        };
        let feedback_text = match runner.complete(
            feedback,
            PromptRole::Feedback,
            0,
            index,
            &[("candidate", &candidate)],
            settings.temperature,
        ) {
            Ok(text) => text,
            Err(e) => {
                record.error = Some(format!("candidate {index}: {e}"));
                break;
            }
        };
        let Some(self_score) = settings.self_scorer.score(&feedback_text) else {
            record.error = Some(format!("candidate {index}: unusable feedback"));
            continue;
        };
        let true_score = match true_scorer.score(task, &candidate, index) {
            Ok(score) => score,
            Err(e) => {
                record.error = Some(format!("candidate {index}: {e}"));
                break;
            }
        };
        record.candidates.push(Candidate {
            text: candidate,
            self_score,
            true_score,
        });
    }
    record.selected_index = record
        .candidates
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.self_score
                .partial_cmp(&b.1.self_score)
                .unwrap()
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    record
}

/// Paraphrase probe: score the external texts (before), paraphrase each,
/// score the paraphrases (after). A per-sample provider failure excludes
/// that sample from both blocks, keeping the comparison paired.
pub fn run_paraphrase_probe(
    outputs: &[(TaskSpec, String)],
    paraphraser: &dyn Provider,
    feedback: &dyn Provider,
    true_scorer: &dyn TrueScorer,
    settings: &RunSettings,
) -> Result<(BiasStats, BiasStats)> {
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (task, external_text) in outputs {
        if external_text.is_empty() {
            return Err(Error::Validation(format!(
                "sample {} has an empty external text",
                task.id
            )));
        }
        let runner = SampleRunner::new(task, settings);
        let sample = (|| -> Result<(ScorePair, ScorePair)> {
            let fb_before = runner.complete(
                feedback,
                PromptRole::Feedback,
                0,
                0,
                &[("candidate", external_text)],
                settings.temperature,
            )?;
            let self_before = settings
                .self_scorer
                .score(&fb_before)
                .ok_or(Error::UnusableFeedback)?;
            let true_before = true_scorer.score(task, external_text, 0)?;

            let paraphrased = runner.complete(
                paraphraser,
                PromptRole::Paraphrase,
                1,
                0,
                &[("candidate", external_text)],
                settings.temperature,
            )?;
            let fb_after = runner.complete(
                feedback,
                PromptRole::Feedback,
                1,
                0,
                &[("candidate", &paraphrased)],
                settings.temperature,
            )?;
            let self_after = settings
                .self_scorer
                .score(&fb_after)
                .ok_or(Error::UnusableFeedback)?;
            let true_after = true_scorer.score(task, &paraphrased, 1)?;
            Ok((
                ScorePair::new(task.id.clone(), 0, self_before, true_before),
                ScorePair::new(task.id.clone(), 1, self_after, true_after),
            ))
        })();
        if let Ok((b, a)) = sample {
            before.push(b);
            after.push(a);
        }
    }
    Ok((bias_stats(&before, 0.0)?, bias_stats(&after, 0.0)?))
}

/// Runs one job per task under a bounded worker pool and returns the results
/// sorted by sample id. `workers == 1` is the sequential deterministic mode;
/// per-sample seeds make the output independent of scheduling either way.
pub fn run_dataset<T, F>(tasks: &[TaskSpec], workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(&TaskSpec) -> T + Sync,
{
    let workers = workers.max(1).min(tasks.len().max(1));
    let mut slots: Vec<Option<T>> = Vec::with_capacity(tasks.len());
    slots.resize_with(tasks.len(), || None);
    if workers == 1 {
        for (slot, task) in slots.iter_mut().zip(tasks) {
            *slot = Some(job(task));
        }
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                let job = &job;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= tasks.len() {
                        break;
                    }
                    if tx.send((i, job(&tasks[i]))).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);
        for (i, result) in rx {
            slots[i] = Some(result);
        }
    }
    let mut out: Vec<(String, T)> = slots
        .into_iter()
        .zip(tasks)
        .map(|(result, task)| (task.id.clone(), result.unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, r)| r).collect()
}
