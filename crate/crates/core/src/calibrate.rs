//! Quantile mapping between two empirical score distributions.
//!
//! Transports a proxy metric's score distribution (e.g. a learned metric on
//! roughly [0, 1]) onto another scale (e.g. MQM's [-25, 0]) by pairing equal
//! percentile ranks, preserving rank order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotone empirical-CDF-to-empirical-CDF mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub source_quantiles: Vec<f64>,
    pub target_quantiles: Vec<f64>,
}

/// Empirical quantile with linear interpolation on sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn sorted_copy(label: &str, samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::Validation(format!(
            "{label} needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Validation(format!(
            "{label} contains non-finite value {bad}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

impl QuantileMap {
    /// Fits the map by sorting both sides and pairing equal percentile ranks.
    ///
    /// When lengths differ, both empirical quantile functions are evaluated
    /// at the longer list's percentile grid by linear interpolation.
    /// Duplicate sample values are kept.
    pub fn fit(source_samples: &[f64], target_samples: &[f64]) -> Result<Self> {
        let source = sorted_copy("source", source_samples)?;
        let target = sorted_copy("target", target_samples)?;
        let n = source.len().max(target.len());
        let mut source_quantiles = Vec::with_capacity(n);
        let mut target_quantiles = Vec::with_capacity(n);
        for i in 0..n {
            let p = i as f64 / (n - 1) as f64;
            source_quantiles.push(quantile(&source, p));
            target_quantiles.push(quantile(&target, p));
        }
        Ok(Self {
            source_quantiles,
            target_quantiles,
        })
    }

    /// Piecewise-linear interpolation between the bracketing source
    /// quantiles; values outside the source range clamp to the endpoint
    /// target quantiles.
    pub fn apply(&self, value: f64) -> Result<f64> {
        if !value.is_finite() {
            return Err(Error::Validation(format!("non-finite value {value}")));
        }
        let sq = &self.source_quantiles;
        let tq = &self.target_quantiles;
        let idx = sq.partition_point(|&q| q < value);
        if idx == 0 {
            return Ok(tq[0]);
        }
        if idx == sq.len() {
            return Ok(*tq.last().unwrap());
        }
        if sq[idx] == value {
            return Ok(tq[idx]);
        }
        let frac = (value - sq[idx - 1]) / (sq[idx] - sq[idx - 1]);
        Ok(tq[idx - 1] + frac * (tq[idx] - tq[idx - 1]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_quantiles.len() != self.target_quantiles.len() {
            return Err(Error::Validation(
                "quantile tables have different lengths".into(),
            ));
        }
        if self.source_quantiles.len() < 2 {
            return Err(Error::Validation("quantile tables need length >= 2".into()));
        }
        for table in [&self.source_quantiles, &self.target_quantiles] {
            if table.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Validation("quantile table not non-decreasing".into()));
            }
            if table.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("quantile table has non-finite value".into()));
            }
        }
        Ok(())
    }
}
