//! Bias and distance-skewness statistics over (self score, true score) pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Trajectory;

/// Score scale a pair is validated against at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    /// MQM translation scale, [-25, 0].
    Mqm,
    /// Binary tasks (coverage, exact match), {0, 1}.
    Binary,
}

impl ScoreScale {
    pub fn admits(&self, value: f64) -> bool {
        match self {
            ScoreScale::Mqm => (-25.0..=0.0).contains(&value),
            ScoreScale::Binary => value == 0.0 || value == 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoreScale::Mqm => "mqm",
            ScoreScale::Binary => "binary",
        }
    }
}

/// One sample's (self-assessed, true) score at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub sample_id: String,
    pub iteration: u32,
    pub self_score: f64,
    pub true_score: f64,
}

impl ScorePair {
    pub fn new(
        sample_id: impl Into<String>,
        iteration: u32,
        self_score: f64,
        true_score: f64,
    ) -> Self {
        Self {
            sample_id: sample_id.into(),
            iteration,
            self_score,
            true_score,
        }
    }

    /// Rejects non-finite scores and, when a scale is given, out-of-scale scores.
    pub fn validate(&self, scale: Option<ScoreScale>) -> Result<()> {
        if !self.self_score.is_finite() || !self.true_score.is_finite() {
            return Err(Error::NonFinite {
                sample_id: self.sample_id.clone(),
            });
        }
        if let Some(scale) = scale {
            for score in [self.self_score, self.true_score] {
                if !scale.admits(score) {
                    return Err(Error::ScaleViolation {
                        sample_id: self.sample_id.clone(),
                        scale: scale.name().to_string(),
                        score,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Aggregate statistics for one collection of score pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStats {
    pub n: usize,
    pub bias: f64,
    pub dskew: f64,
    pub mean_self: f64,
    pub mean_true: f64,
}

/// Per-pair residuals self_score - true_score, order preserved.
pub fn residuals(pairs: &[ScorePair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            p.validate(None)?;
            Ok(p.self_score - p.true_score)
        })
        .collect()
}

/// Mean residual. Positive means self-overestimation.
pub fn bias(pairs: &[ScorePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::NoSamples);
    }
    let xs = residuals(pairs)?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Distance skewness of the residual distribution about `gamma`.
///
/// V-statistic form over all n^2 ordered pairs including i = j:
/// 1 - sum |x_i - x_j| / sum |x_i + x_j - 2*gamma|. A zero denominator
/// (every residual equal to gamma) is perfect symmetry and returns 0.
pub fn distance_skewness(residuals: &[f64], gamma: f64) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::NoSamples);
    }
    if let Some(bad) = residuals.iter().find(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("non-finite residual {bad}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &xi in residuals {
        for &xj in residuals {
            num += (xi - xj).abs();
            den += (xi + xj - 2.0 * gamma).abs();
        }
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    let raw = 1.0 - num / den;
    if !(-1e-9..=1.0 + 1e-9).contains(&raw) {
        return Err(Error::StatOutOfRange(raw));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Bias, distance skewness and the two means over one pair collection.
pub fn bias_stats(pairs: &[ScorePair], gamma: f64) -> Result<BiasStats> {
    if pairs.is_empty() {
        return Err(Error::NoSamples);
    }
    let xs = residuals(pairs)?;
    let n = pairs.len();
    let mean_self = pairs.iter().map(|p| p.self_score).sum::<f64>() / n as f64;
    let mean_true = pairs.iter().map(|p| p.true_score).sum::<f64>() / n as f64;
    Ok(BiasStats {
        n,
        bias: xs.iter().sum::<f64>() / n as f64,
        dskew: distance_skewness(&xs, gamma)?,
        mean_self,
        mean_true,
    })
}

/// Per-iteration statistics over the current accepted output of each sample.
///
/// A sample whose refinement was rejected at some step carries forward its
/// previous accepted scores; a trajectory shorter than the longest one keeps
/// its last accepted scores for the remaining iterations.
pub fn per_iteration_stats(trajectories: &[Trajectory]) -> Result<Vec<(u32, BiasStats)>> {
    if trajectories.is_empty() {
        return Err(Error::NoSamples);
    }
    let scale = trajectories[0].task.scale();
    for t in trajectories {
        if t.task.scale() != scale {
            return Err(Error::Validation(format!(
                "trajectory {} uses the {} scale, expected {}",
                t.sample_id,
                t.task.scale().name(),
                scale.name()
            )));
        }
        if t.iterations.is_empty() {
            return Err(Error::Validation(format!(
                "trajectory {} has no iteration records",
                t.sample_id
            )));
        }
        if t.iterations[0].index != 0 || !t.iterations[0].accepted {
            return Err(Error::Validation(format!(
                "trajectory {} lacks an accepted record at iteration 0",
                t.sample_id
            )));
        }
        for (i, rec) in t.iterations.iter().enumerate() {
            if rec.index as usize != i {
                return Err(Error::Validation(format!(
                    "trajectory {} has non-contiguous iteration indices",
                    t.sample_id
                )));
            }
        }
    }

    let max_iter = trajectories
        .iter()
        .map(|t| t.iterations.last().unwrap().index)
        .max()
        .unwrap();

    let mut out = Vec::with_capacity(max_iter as usize + 1);
    for iter in 0..=max_iter {
        let mut pairs = Vec::with_capacity(trajectories.len());
        for t in trajectories {
            let mut self_score = t.iterations[0].self_score;
            let mut true_score = t.iterations[0].true_score;
            for rec in &t.iterations {
                if rec.index > iter {
                    break;
                }
                if rec.accepted {
                    self_score = rec.self_score;
                    true_score = rec.true_score;
                }
            }
            pairs.push(ScorePair::new(t.sample_id.clone(), iter, self_score, true_score));
        }
        out.push((iter, bias_stats(&pairs, 0.0)?));
    }
    Ok(out)
}
