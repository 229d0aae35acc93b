//! Concept coverage scoring for constrained text generation.
//!
//! Matching is case-insensitive substring, so "thrown" covers "throw".

use crate::error::{Error, Result};

/// 1 iff every concept appears as a case-insensitive substring of the text.
pub fn coverage_score(text: &str, concepts: &[String]) -> f64 {
    if missing_concepts(text, concepts).is_empty() {
        1.0
    } else {
        0.0
    }
}

/// Concepts failing the substring test, in input order.
pub fn missing_concepts(text: &str, concepts: &[String]) -> Vec<String> {
    let haystack = text.to_lowercase();
    concepts
        .iter()
        .filter(|c| !haystack.contains(&c.to_lowercase()))
        .cloned()
        .collect()
}

/// Parsed coverage feedback from a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverageFeedback {
    AllCovered,
    Missing(Vec<String>),
}

/// Accepts the literal `all covered` (case/whitespace-insensitive) or a
/// bracketed, quoted, comma-separated concept list. Anything else is an
/// error the pipeline treats as "no usable feedback".
pub fn parse_coverage_feedback(text: &str) -> Result<CoverageFeedback> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case("all covered") {
        return Ok(CoverageFeedback::AllCovered);
    }
    let inner = trimmed
        .strip_prefix('[')
        .and_then(|rest| rest.strip_suffix(']'))
        .ok_or(Error::UnusableFeedback)?;
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(CoverageFeedback::Missing(Vec::new()));
    }
    let mut concepts = Vec::new();
    for item in inner.split(',') {
        let item = item.trim();
        let unquoted = item
            .strip_prefix('\'')
            .and_then(|rest| rest.strip_suffix('\''))
            .or_else(|| item.strip_prefix('"').and_then(|rest| rest.strip_suffix('"')))
            .ok_or(Error::UnusableFeedback)?;
        if unquoted.is_empty() {
            return Err(Error::UnusableFeedback);
        }
        concepts.push(unquoted.to_string());
    }
    Ok(CoverageFeedback::Missing(concepts))
}
