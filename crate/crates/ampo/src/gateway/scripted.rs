//! A deterministic backend driven by a JSONL script.

use std::path::Path;
use std::sync::Mutex;

use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel, RequestTag, Usage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    /// Matches any request, once.
    Any,
    /// Matches every request with the given request tag.
    Tag,
    /// Matches every request whose message text contains the value.
    Contains,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub kind: MatchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_value: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn any(response: impl Into<String>) -> Self {
        Self { kind: MatchKind::Any, match_value: None, response: response.into() }
    }

    pub fn tag(tag: RequestTag, response: impl Into<String>) -> Self {
        Self {
            kind: MatchKind::Tag,
            match_value: Some(tag.to_string()),
            response: response.into(),
        }
    }

    pub fn contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            kind: MatchKind::Contains,
            match_value: Some(needle.into()),
            response: response.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("script line {line}: {message}")]
    Line { line: usize, message: String },
}

enum Matcher {
    Any,
    Tag(RequestTag),
    Contains(String),
}

/// First match wins, in script order. `any` entries are used up when they
/// match; `tag` and `contains` entries answer as often as they match, which
/// makes them safe under concurrent calls.
pub struct ScriptedBackend {
    entries: Vec<(Matcher, String)>,
    used: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, ScriptError> {
        let compiled = entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| compile(e).map_err(|message| ScriptError::Line { line: i + 1, message }))
            .collect::<Result<Vec<_>, _>>()?;
        let used = Mutex::new(vec![false; compiled.len()]);
        Ok(Self { entries: compiled, used })
    }

    /// Parses one entry per non-blank line.
    pub fn from_jsonl(text: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| ScriptError::Line { line: i + 1, message: e.to_string() })?;
            compile(entry.clone()).map_err(|message| ScriptError::Line { line: i + 1, message })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScriptError::Io { path: path.display().to_string(), source })?;
        Self::from_jsonl(&text)
    }
}

fn compile(entry: ScriptEntry) -> Result<(Matcher, String), String> {
    let matcher = match (entry.kind, entry.match_value) {
        (MatchKind::Any, _) => Matcher::Any,
        (MatchKind::Tag, Some(v)) => Matcher::Tag(v.parse()?),
        (MatchKind::Contains, Some(v)) if !v.is_empty() => Matcher::Contains(v),
        (kind, _) => return Err(format!("{kind:?} entry needs a non-empty match_value")),
    };
    Ok((matcher, entry.response))
}

fn words(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

impl LanguageModel for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let text = request.joined_content();
        let mut used = self.used.lock().expect("script cursor poisoned");
        let hit = self.entries.iter().enumerate().find(|(i, (m, _))| match m {
            Matcher::Any => !used[*i],
            Matcher::Tag(tag) => *tag == request.request_tag,
            Matcher::Contains(needle) => text.contains(needle.as_str()),
        });
        let Some((i, (matcher, response))) = hit else {
            return Err(GatewayError::Unscripted(request.request_tag));
        };
        if matches!(matcher, Matcher::Any) {
            used[i] = true;
        }
        Ok(ChatResponse {
            content: response.clone(),
            usage: Usage { prompt_tokens: words(&text), completion_tokens: words(response) },
            latency_ms: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(tag: RequestTag, text: &str) -> ChatRequest {
        ChatRequest::user("m", text, 0.0, None, tag)
    }

    #[test]
    fn any_entries_are_a_queue() {
        let b = ScriptedBackend::new(vec![ScriptEntry::any("B"), ScriptEntry::any("C")]).unwrap();
        let r = req(RequestTag::Target, "x");
        assert_eq!(b.complete(&r).unwrap().content, "B");
        assert_eq!(b.complete(&r).unwrap().content, "C");
        assert_eq!(b.complete(&r), Err(GatewayError::Unscripted(RequestTag::Target)));
    }

    #[test]
    fn first_match_wins() {
        let b = ScriptedBackend::from_jsonl(concat!(
            r#"{"match":"tag","match_value":"analyzer","response":"<START>r1<END>"}"#,
            "\n\n",
            r#"{"match":"contains","match_value":"needle","response":"hit"}"#,
            "\n",
            r#"{"match":"any","response":"fallback"}"#,
        ))
        .unwrap();
        assert_eq!(b.complete(&req(RequestTag::Analyzer, "needle")).unwrap().content, "<START>r1<END>");
        assert_eq!(b.complete(&req(RequestTag::Analyzer, "x")).unwrap().content, "<START>r1<END>");
        assert_eq!(b.complete(&req(RequestTag::Target, "a needle b")).unwrap().content, "hit");
        assert_eq!(b.complete(&req(RequestTag::Target, "other")).unwrap().content, "fallback");
        assert!(b.complete(&req(RequestTag::Target, "other")).is_err());
    }

    #[test]
    fn bad_lines_are_located() {
        let err = ScriptedBackend::from_jsonl("{\"match\":\"any\",\"response\":\"a\"}\n{\"match\":\"tag\",\"response\":\"b\"}")
            .err()
            .unwrap();
        assert!(err.to_string().starts_with("script line 2:"), "{err}");
        let err = ScriptedBackend::from_jsonl("not json").err().unwrap();
        assert!(err.to_string().starts_with("script line 1:"));
    }
}
