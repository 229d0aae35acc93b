//! Task-specific scoring: MQM feedback parsing, concept coverage, math
//! answer extraction and voting.

pub mod coverage;
pub mod math;
pub mod mqm;

pub use coverage::{coverage_score, missing_concepts, parse_coverage_feedback, CoverageFeedback};
pub use math::{
    consistency_score, exact_match_score, extract_boxed_answer, majority_vote, normalize_answer,
};
pub use mqm::{mqm_score, parse_mqm_feedback, MqmAnnotation, MqmError, Severity};

/// Turns raw feedback text into the pipeline's self-assessed score.
///
/// `None` means the feedback was unusable; the pipeline then keeps the prior
/// output instead of treating garbage as a quality signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfScorer {
    /// Parse MQM error annotations and apply the severity weights.
    Mqm,
    /// Coverage verdict: `all covered` (or an empty missing list) scores 1,
    /// a non-empty missing list scores 0.
    Coverage,
    /// The feedback text is a plain numeric score.
    Scalar,
}

impl SelfScorer {
    pub fn score(&self, feedback: &str) -> Option<f64> {
        match self {
            SelfScorer::Mqm => {
                let annotation = parse_mqm_feedback(feedback);
                if annotation.parse_warning {
                    None
                } else {
                    Some(mqm_score(&annotation))
                }
            }
            SelfScorer::Coverage => match parse_coverage_feedback(feedback) {
                Ok(CoverageFeedback::AllCovered) => Some(1.0),
                Ok(CoverageFeedback::Missing(missing)) => {
                    Some(if missing.is_empty() { 1.0 } else { 0.0 })
                }
                Err(_) => None,
            },
            SelfScorer::Scalar => feedback.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
        }
    }
}
