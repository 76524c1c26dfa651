//! Meta-prompt templates with `{{placeholder}}` substitution.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("missing placeholder `{{{{{0}}}}}`")]
    MissingPlaceholder(String),
    #[error("{role} template uses unsupported placeholder `{{{{{name}}}}}`")]
    UnsupportedPlaceholder { role: TemplateRole, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateRole {
    Analyzer,
    Summarizer,
    Revisor,
    Initializer,
    /// Single-reason rewrite used by the beam and tree baselines.
    Editor,
}

impl TemplateRole {
    pub const ALL: [TemplateRole; 5] = [
        TemplateRole::Analyzer,
        TemplateRole::Summarizer,
        TemplateRole::Revisor,
        TemplateRole::Initializer,
        TemplateRole::Editor,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateRole::Analyzer => "analyzer.txt",
            TemplateRole::Summarizer => "summarizer.txt",
            TemplateRole::Revisor => "revisor.txt",
            TemplateRole::Initializer => "initializer.txt",
            TemplateRole::Editor => "editor.txt",
        }
    }

    /// Placeholders the render context for this role always provides.
    pub fn supported_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateRole::Analyzer => &["initial_prompt", "bad_examples"],
            TemplateRole::Summarizer => &["initial_prompt", "Reasons"],
            TemplateRole::Revisor | TemplateRole::Editor => &["initial_prompt", "patterns"],
            TemplateRole::Initializer => &["task_description", "examples"],
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateRole::Analyzer => include_str!("../templates/analyzer.txt"),
            TemplateRole::Summarizer => include_str!("../templates/summarizer.txt"),
            TemplateRole::Revisor => include_str!("../templates/revisor.txt"),
            TemplateRole::Initializer => include_str!("../templates/initializer.txt"),
            TemplateRole::Editor => include_str!("../templates/editor.txt"),
        }
    }
}

impl fmt::Display for TemplateRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.file_name();
        f.write_str(&name[..name.len() - 4])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPromptTemplate {
    role: TemplateRole,
    body: String,
}

impl MetaPromptTemplate {
    /// Rejects bodies that use a placeholder the role cannot fill.
    pub fn new(role: TemplateRole, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let supported = role.supported_placeholders();
        for name in placeholders(&body) {
            if !supported.contains(&name) {
                return Err(TemplateError::UnsupportedPlaceholder {
                    role,
                    name: String::from(name),
                });
            }
        }
        Ok(Self { role, body })
    }

    pub fn builtin(role: TemplateRole) -> Self {
        Self {
            role,
            body: String::from(role.builtin_body()),
        }
    }

    pub fn role(&self) -> TemplateRole {
        self.role
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn render(&self, context: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        render(&self.body, context)
    }
}

/// The template for every role, built-in unless overridden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateRole, MetaPromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: TemplateRole::ALL
                .into_iter()
                .map(|r| (r, MetaPromptTemplate::builtin(r)))
                .collect(),
        }
    }
}

impl TemplateSet {
    pub fn with_override(mut self, template: MetaPromptTemplate) -> Self {
        self.templates.insert(template.role, template);
        self
    }

    pub fn get(&self, role: TemplateRole) -> &MetaPromptTemplate {
        &self.templates[&role]
    }
}

/// Names of `{{name}}` placeholders in order of appearance (with repeats).
pub fn placeholders(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some((name, _, after)) = next_placeholder(rest) {
        out.push(name);
        rest = after;
    }
    out
}

/// Returns `(name, text before, text after)` for the next placeholder.
fn next_placeholder(s: &str) -> Option<(&str, &str, &str)> {
    let mut from = 0;
    while let Some(pos) = s[from..].find("{{") {
        let open = from + pos;
        let inner = &s[open + 2..];
        let name_len = inner
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(inner.len());
        if name_len > 0 && inner[name_len..].starts_with("}}") {
            let name = &inner[..name_len];
            return Some((name, &s[..open], &inner[name_len + 2..]));
        }
        from = open + 1;
    }
    None
}

/// Substitutes every `{{name}}` in `body` from `context` in a single pass;
/// substituted text is never rescanned.
pub fn render(body: &str, context: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some((name, before, after)) = next_placeholder(rest) {
        let value = context
            .get(name)
            .ok_or_else(|| TemplateError::MissingPlaceholder(String::from(name)))?;
        out.push_str(before);
        out.push_str(value);
        rest = after;
    }
    out.push_str(rest);
    Ok(out)
}
