//! Parser and scorer for MQM-style translation feedback.
//!
//! Line grammar (normative): each error line is
//!
//! ```text
//! <quote>span<quote> is a <severity> <category>/<subcategory> error
//! ```
//!
//! where the quote character is one of U+0027, U+0022, U+2018, U+2019,
//! U+201C, U+201D; severity is minor, major or critical; category is one of
//! the taxonomy heads (accuracy, fluency, locale convention, style,
//! terminology, non-translation, other); the subcategory may be absent.
//! Lines equal to `no-error` (case-insensitive, trimmed) or with no match
//! are skipped. The parser is total over arbitrary input.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Minor,
    Major,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqmError {
    pub span: String,
    pub category: String,
    pub subcategory: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqmAnnotation {
    pub errors: Vec<MqmError>,
    pub raw_text: String,
    /// Set when a non-empty block produced no parseable error line and was
    /// not a clean `no-error` verdict.
    pub parse_warning: bool,
}

const CATEGORY_HEADS: [&str; 7] = [
    "accuracy",
    "fluency",
    "locale convention",
    "style",
    "terminology",
    "non-translation",
    "other",
];

fn line_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?i)^\s*['"\u{2018}\u{2019}\u{201C}\u{201D}](?P<span>.+?)['"\u{2018}\u{2019}\u{201C}\u{201D}]\s+is\s+an?\s+(?P<sev>minor|major|critical)\s+(?P<cat>.+?)\s+error\s*\.?\s*$"#,
        )
        .expect("mqm line pattern")
    })
}

fn is_no_error(text: &str) -> bool {
    text.trim().eq_ignore_ascii_case("no-error")
}

fn parse_line(line: &str) -> Option<MqmError> {
    let caps = line_pattern().captures(line)?;
    let span = caps.name("span").unwrap().as_str().to_string();
    if span.is_empty() {
        return None;
    }
    let severity = match caps.name("sev").unwrap().as_str().to_ascii_lowercase().as_str() {
        "minor" => Severity::Minor,
        "major" => Severity::Major,
        _ => Severity::Critical,
    };
    let taxonomy = caps.name("cat").unwrap().as_str().trim();
    let (category, subcategory) = match taxonomy.split_once('/') {
        Some((head, sub)) => (head.trim(), sub.trim()),
        None => (taxonomy, ""),
    };
    let category = category.to_lowercase();
    if !CATEGORY_HEADS.contains(&category.as_str()) {
        return None;
    }
    Some(MqmError {
        span,
        category,
        subcategory: subcategory.to_string(),
        severity,
    })
}

/// Parses an MQM feedback block. Never fails; garbage input yields an empty
/// error list with `parse_warning` set.
pub fn parse_mqm_feedback(text: &str) -> MqmAnnotation {
    if is_no_error(text) {
        return MqmAnnotation {
            errors: Vec::new(),
            raw_text: text.to_string(),
            parse_warning: false,
        };
    }
    let errors: Vec<MqmError> = text
        .lines()
        .filter(|line| !is_no_error(line))
        .filter_map(parse_line)
        .collect();
    let parse_warning = errors.is_empty();
    MqmAnnotation {
        errors,
        raw_text: text.to_string(),
        parse_warning,
    }
}

/// MQM score: -1 per minor error, -5 per major or critical error, floored
/// at -25. A clean annotation scores 0.
pub fn mqm_score(annotation: &MqmAnnotation) -> f64 {
    let penalty: i64 = annotation
        .errors
        .iter()
        .map(|e| match e.severity {
            Severity::Minor => 1,
            Severity::Major | Severity::Critical => 5,
        })
        .sum();
    (-(penalty as f64)).max(-25.0)
}
