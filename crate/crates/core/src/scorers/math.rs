//! Boxed-answer extraction, majority voting and exact match for math tasks.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Contents of the last `\boxed{...}` occurrence, found by balanced-brace
/// scanning, with surrounding whitespace trimmed.
pub fn extract_boxed_answer(solution: &str) -> Result<String> {
    const TAG: &str = "\\boxed{";
    let start = solution.rfind(TAG).ok_or(Error::NoAnswer)?;
    let body = &solution[start + TAG.len()..];
    let mut depth = 1usize;
    for (i, ch) in body.char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok(body[..i].trim().to_string());
                }
            }
            _ => {}
        }
    }
    Err(Error::NoAnswer)
}

/// Trim and collapse internal whitespace.
pub fn normalize_answer(answer: &str) -> String {
    answer.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Most frequent normalized answer and its count; ties broken by earliest
/// first occurrence in the list.
pub fn majority_vote(answers: &[String]) -> Result<(String, usize)> {
    if answers.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, answer) in answers.iter().enumerate() {
        let normalized = normalize_answer(answer);
        let entry = counts.entry(normalized).or_insert((0, i));
        entry.0 += 1;
    }
    let (winner, (count, _)) = counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .unwrap();
    Ok((winner, count))
}

/// 1 iff the answers are equal after normalization.
pub fn consistency_score(initial: &str, voted: &str) -> f64 {
    if normalize_answer(initial) == normalize_answer(voted) {
        1.0
    } else {
        0.0
    }
}

/// Normalized string equality against the gold answer.
pub fn exact_match_score(answer: &str, gold: &str) -> f64 {
    consistency_score(answer, gold)
}
