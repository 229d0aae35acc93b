//! Prompt templates with named slots and single-pass rendering.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::TaskKind;

/// Slot markers recognized in template bodies. Any other `{...}` text (e.g.
/// LaTeX braces) passes through untouched.
pub const SLOT_NAMES: [&str; 6] = [
    "source",
    "candidate",
    "concepts",
    "previous",
    "feedback",
    "problem",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    Initial,
    Feedback,
    Refinement,
    Paraphrase,
}

impl PromptRole {
    pub fn name(&self) -> &'static str {
        match self {
            PromptRole::Initial => "initial",
            PromptRole::Feedback => "feedback",
            PromptRole::Refinement => "refinement",
            PromptRole::Paraphrase => "paraphrase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "initial" => Some(PromptRole::Initial),
            "feedback" => Some(PromptRole::Feedback),
            "refinement" => Some(PromptRole::Refinement),
            "paraphrase" => Some(PromptRole::Paraphrase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub role: PromptRole,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, role: PromptRole, body: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role: role.into(),
            body: body.into(),
        }
    }

    /// Slot names referenced by the body.
    pub fn referenced_slots(&self) -> Vec<&'static str> {
        SLOT_NAMES
            .iter()
            .copied()
            .filter(|slot| self.body.contains(&format!("{{{slot}}}")))
            .collect()
    }
}

/// Exact substitution, no escaping of slot contents. Slot values are never
/// rescanned, so markers inside a value do not bleed into other slots.
/// A referenced slot missing from the map is an error.
pub fn render(template: &PromptTemplate, slots: &HashMap<String, String>) -> Result<String> {
    let body = &template.body;
    let mut out = String::with_capacity(body.len());
    let mut rest = body.as_str();
    'outer: while let Some(open) = rest.find('{') {
        let (before, from_open) = rest.split_at(open);
        out.push_str(before);
        for slot in SLOT_NAMES {
            let marker_len = slot.len() + 2;
            if from_open.len() >= marker_len
                && from_open[1..].starts_with(slot)
                && from_open.as_bytes()[marker_len - 1] == b'}'
            {
                let value = slots
                    .get(slot)
                    .ok_or_else(|| Error::MissingSlot(slot.to_string()))?;
                out.push_str(value);
                rest = &from_open[marker_len..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &from_open[1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Templates for one task kind.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub initial: PromptTemplate,
    pub feedback: Option<PromptTemplate>,
    pub refinement: Option<PromptTemplate>,
    pub paraphrase: Option<PromptTemplate>,
}

impl TemplateSet {
    /// Bundled defaults for a task kind.
    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Translation => TemplateSet {
                initial: PromptTemplate::new(
                    "mt_initial",
                    PromptRole::Initial,
                    include_str!("../../templates/mt_initial.txt"),
                ),
                feedback: Some(PromptTemplate::new(
                    "mt_feedback",
                    PromptRole::Feedback,
                    include_str!("../../templates/mt_feedback.txt"),
                )),
                refinement: Some(PromptTemplate::new(
                    "mt_refinement",
                    PromptRole::Refinement,
                    include_str!("../../templates/mt_refinement.txt"),
                )),
                paraphrase: Some(PromptTemplate::new(
                    "mt_paraphrase",
                    PromptRole::Paraphrase,
                    include_str!("../../templates/mt_paraphrase.txt"),
                )),
            },
            TaskKind::ConstrainedGen => TemplateSet {
                initial: PromptTemplate::new(
                    "commongen_initial",
                    PromptRole::Initial,
                    include_str!("../../templates/commongen_initial.txt"),
                ),
                feedback: Some(PromptTemplate::new(
                    "commongen_feedback",
                    PromptRole::Feedback,
                    include_str!("../../templates/commongen_feedback.txt"),
                )),
                refinement: Some(PromptTemplate::new(
                    "commongen_refinement",
                    PromptRole::Refinement,
                    include_str!("../../templates/commongen_refinement.txt"),
                )),
                paraphrase: None,
            },
            TaskKind::Math => TemplateSet {
                initial: PromptTemplate::new(
                    "math_initial",
                    PromptRole::Initial,
                    include_str!("../../templates/math_initial.txt"),
                ),
                feedback: None,
                refinement: None,
                paraphrase: None,
            },
        }
    }

    /// Loads overrides from a directory holding `initial.txt`,
    /// `feedback.txt`, `refinement.txt` and/or `paraphrase.txt`; any file
    /// not present falls back to the bundled default.
    pub fn load_dir(dir: &Path, kind: TaskKind) -> Result<Self> {
        let mut set = Self::default_for(kind);
        let read = |name: &str| -> Result<Option<String>> {
            let path = dir.join(name);
            if path.exists() {
                Ok(Some(std::fs::read_to_string(path)?))
            } else {
                Ok(None)
            }
        };
        if let Some(body) = read("initial.txt")? {
            set.initial = PromptTemplate::new("initial", PromptRole::Initial, body);
        }
        if let Some(body) = read("feedback.txt")? {
            set.feedback = Some(PromptTemplate::new("feedback", PromptRole::Feedback, body));
        }
        if let Some(body) = read("refinement.txt")? {
            set.refinement = Some(PromptTemplate::new(
                "refinement",
                PromptRole::Refinement,
                body,
            ));
        }
        if let Some(body) = read("paraphrase.txt")? {
            set.paraphrase = Some(PromptTemplate::new(
                "paraphrase",
                PromptRole::Paraphrase,
                body,
            ));
        }
        Ok(set)
    }

    pub fn for_role(&self, role: PromptRole) -> Result<&PromptTemplate> {
        let t = match role {
            PromptRole::Initial => Some(&self.initial),
            PromptRole::Feedback => self.feedback.as_ref(),
            PromptRole::Refinement => self.refinement.as_ref(),
            PromptRole::Paraphrase => self.paraphrase.as_ref(),
        };
        t.ok_or_else(|| Error::Validation(format!("no {} template for this task", role.name())))
    }
}
