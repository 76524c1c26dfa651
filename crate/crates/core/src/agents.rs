//! The optimizer roles: analyzer, summarizer, revisor, and the initializer
//! that writes the first prompt from a few training examples.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::llm::{ChatRequest, GatewayError, LanguageModel, RequestTag};
use crate::parse::{importance_score, tagged_spans};
use crate::rng::{self, Stream};
use crate::template::{TemplateError, TemplateRole, TemplateSet};
use crate::types::{
    DataError, FailureCase, Pattern, PatternStrategy, PromptCandidate, RunConfig, TaskSpec,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("analyzer output contains no <START>…<END> reasons; raw output: {raw}")]
    NoReasonsParsed { raw: String },
    #[error("summarizer output contains no <START>…<END> patterns; raw output: {raw}")]
    NoPatternsParsed { raw: String },
    #[error("revision is empty")]
    EmptyRevision,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// One explanation of why the prompt failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    pub id: String,
    pub text: String,
    pub failure_ids: Vec<String>,
}

/// Renders meta-prompts and calls the optimizer model.
///
/// Ids of produced reasons and patterns are prefixed with the caller's
/// `scope` so they stay unique across a run.
pub struct Agents<'a> {
    pub model: &'a dyn LanguageModel,
    pub optimizer_model: String,
    pub templates: TemplateSet,
    pub analyzer_temperature: f64,
    pub summarizer_temperature: f64,
    pub revisor_temperature: f64,
    pub initializer_temperature: f64,
    pub max_tokens: Option<u32>,
}

impl<'a> Agents<'a> {
    pub fn new(
        model: &'a dyn LanguageModel,
        optimizer_model: impl Into<String>,
        templates: TemplateSet,
        config: &RunConfig,
    ) -> Self {
        Self {
            model,
            optimizer_model: optimizer_model.into(),
            templates,
            analyzer_temperature: config.analyzer_temperature,
            summarizer_temperature: config.summarizer_temperature,
            revisor_temperature: config.revisor_temperature,
            initializer_temperature: 0.0,
            max_tokens: None,
        }
    }

    fn call(
        &self,
        role: TemplateRole,
        context: &BTreeMap<&str, String>,
        tag: RequestTag,
        temperature: f64,
    ) -> Result<String, AgentError> {
        let content = self.templates.get(role).render(context)?;
        let request = ChatRequest::user(
            self.optimizer_model.clone(),
            content,
            temperature,
            self.max_tokens,
            tag,
        );
        Ok(self.model.complete(&request)?.content)
    }

    pub fn analyze(
        &self,
        prompt: &PromptCandidate,
        failures: &[FailureCase],
        scope: &str,
    ) -> Result<Vec<Reason>, AgentError> {
        if failures.is_empty() {
            return Err(AgentError::Precondition("analyze needs at least one failure".into()));
        }
        let context = BTreeMap::from([
            ("initial_prompt", prompt.text.clone()),
            ("bad_examples", format_bad_examples(failures)),
        ]);
        let raw = self.call(
            TemplateRole::Analyzer,
            &context,
            RequestTag::Analyzer,
            self.analyzer_temperature,
        )?;
        let failure_ids: Vec<String> = failures.iter().map(|f| f.example.id.clone()).collect();
        let reasons: Vec<Reason> = tagged_spans(&raw)
            .into_iter()
            .map(|s| String::from(s.trim()))
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, text)| Reason {
                id: format!("{scope}r{}", i + 1),
                text,
                failure_ids: failure_ids.clone(),
            })
            .collect();
        if reasons.is_empty() {
            return Err(AgentError::NoReasonsParsed { raw });
        }
        Ok(reasons)
    }

    /// Condenses reasons into scored patterns. Spans without a parseable
    /// importance score get 0.
    pub fn summarize(
        &self,
        prompt: &PromptCandidate,
        reasons: &[Reason],
        scope: &str,
    ) -> Result<Vec<Pattern>, AgentError> {
        if reasons.is_empty() {
            return Err(AgentError::Precondition("summarize needs at least one reason".into()));
        }
        let context = BTreeMap::from([
            ("initial_prompt", prompt.text.clone()),
            ("Reasons", numbered(reasons.iter().map(|r| r.text.as_str()))),
        ]);
        let raw = self.call(
            TemplateRole::Summarizer,
            &context,
            RequestTag::Summarizer,
            self.summarizer_temperature,
        )?;
        let reason_ids: Vec<String> = reasons.iter().map(|r| r.id.clone()).collect();
        let mut patterns = Vec::new();
        for span in tagged_spans(&raw) {
            let description = span.trim();
            if description.is_empty() {
                continue;
            }
            let importance = importance_score(description).unwrap_or_else(|| {
                log::warn!("pattern without importance score, using 0: {description}");
                0.0
            });
            let id = format!("{scope}p{}", patterns.len() + 1);
            patterns.push(Pattern::new(id, description, importance, reason_ids.clone())?);
        }
        if patterns.is_empty() {
            return Err(AgentError::NoPatternsParsed { raw });
        }
        Ok(patterns)
    }

    /// Rewrites `prompt` to cover `patterns` with the branching revisor
    /// meta-prompt (which ends with its own pruning step).
    pub fn revise(
        &self,
        prompt: &PromptCandidate,
        patterns: &[Pattern],
        new_id: &str,
        iteration: u32,
    ) -> Result<PromptCandidate, AgentError> {
        self.rewrite(TemplateRole::Revisor, prompt, patterns, new_id, iteration)
    }

    /// Rewrites `prompt` with any revision-style template (`Revisor` or `Editor`).
    pub fn rewrite(
        &self,
        role: TemplateRole,
        prompt: &PromptCandidate,
        patterns: &[Pattern],
        new_id: &str,
        iteration: u32,
    ) -> Result<PromptCandidate, AgentError> {
        if patterns.is_empty() {
            return Err(AgentError::Precondition("revise needs at least one pattern".into()));
        }
        let context = BTreeMap::from([
            ("initial_prompt", prompt.text.clone()),
            ("patterns", numbered(patterns.iter().map(|p| p.description.as_str()))),
        ]);
        let raw = self.call(role, &context, RequestTag::Revisor, self.revisor_temperature)?;
        let text = strip_code_fence(&raw);
        if text.is_empty() {
            return Err(AgentError::EmptyRevision);
        }
        let applied = patterns.iter().map(|p| p.id.clone()).collect();
        Ok(PromptCandidate::derived(new_id, text, prompt, iteration, applied)?)
    }

    /// Writes a first prompt from `n_examples` seeded training examples.
    pub fn initialize_prompt(
        &self,
        task: &TaskSpec,
        n_examples: usize,
        seed: u64,
        id: &str,
    ) -> Result<PromptCandidate, AgentError> {
        let train = task.splits.train();
        if n_examples == 0 || n_examples > train.len() {
            return Err(AgentError::Precondition(format!(
                "n_examples must lie in 1..={} (training split size), got {n_examples}",
                train.len()
            )));
        }
        let mut rng = rng::stream(seed, Stream::FewShot, 0);
        let mut picked = rand::seq::index::sample(&mut rng, train.len(), n_examples).into_vec();
        picked.sort_unstable();
        let examples = picked
            .iter()
            .map(|&i| format!("Input: {}\nOutput: {}", train[i].input.trim(), train[i].gold.trim()))
            .collect::<Vec<_>>()
            .join("\n\n");
        let mut description = task.description.trim().to_owned();
        if let Some(labels) = &task.label_set {
            description.push_str(&format!("\nAllowed answers: {}", labels.join(", ")));
        }
        let context = BTreeMap::from([("task_description", description), ("examples", examples)]);
        let raw = self.call(
            TemplateRole::Initializer,
            &context,
            RequestTag::Initializer,
            self.initializer_temperature,
        )?;
        let text = strip_code_fence(&raw);
        if text.is_empty() {
            return Err(AgentError::EmptyRevision);
        }
        Ok(PromptCandidate::initial(id, text)?)
    }
}

/// `Input / Model answer / Correct answer` blocks separated by blank lines.
pub fn format_bad_examples(failures: &[FailureCase]) -> String {
    failures
        .iter()
        .map(|f| {
            format!(
                "Input: {}\nModel answer: {}\nCorrect answer: {}",
                f.example.input.trim(),
                f.model_output.trim(),
                f.example.gold.trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn numbered<'s>(items: impl Iterator<Item = &'s str>) -> String {
    items
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Trims the output and unwraps it when the whole thing is one fenced block.
pub fn strip_code_fence(raw: &str) -> String {
    let trimmed = raw.trim();
    if let Some(inner) = trimmed.strip_prefix("```").and_then(|s| s.strip_suffix("```")) {
        if let Some((_lang, body)) = inner.split_once('\n') {
            if !body.contains("```") {
                return String::from(body.trim());
            }
        }
    }
    String::from(trimmed)
}

/// Picks `min(n, M)` patterns: the highest importance first (stable on
/// ties), or a seeded uniform sample kept in input order.
pub fn select_patterns(
    patterns: &[Pattern],
    n: usize,
    strategy: PatternStrategy,
    seed: u64,
) -> Vec<Pattern> {
    let take = n.min(patterns.len());
    match strategy {
        PatternStrategy::TopScore => {
            let mut order: Vec<usize> = (0..patterns.len()).collect();
            order.sort_by(|&a, &b| patterns[b].importance.total_cmp(&patterns[a].importance));
            order.into_iter().take(take).map(|i| patterns[i].clone()).collect()
        }
        PatternStrategy::Random => {
            let mut rng = rng::stream(seed, Stream::PatternSelection, 0);
            let mut picked = rand::seq::index::sample(&mut rng, patterns.len(), take).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| patterns[i].clone()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::AnswerExtraction;
    use crate::llm::{ChatResponse, FnModel};
    use crate::types::{DatasetSplits, Example};
    use alloc::sync::Arc;
    use alloc::vec;
    use std::sync::Mutex;

    type Log = Arc<Mutex<Vec<ChatRequest>>>;

    fn scripted(reply: &'static str) -> (FnModel<impl Fn(&ChatRequest) -> Result<ChatResponse, GatewayError>>, Log) {
        let log: Log = Arc::default();
        let sink = log.clone();
        let model = FnModel(move |req: &ChatRequest| {
            sink.lock().unwrap().push(req.clone());
            Ok(ChatResponse::text(reply))
        });
        (model, log)
    }

    fn agents(model: &dyn LanguageModel) -> Agents<'_> {
        Agents::new(model, "optimizer", TemplateSet::default(), &RunConfig::default())
    }

    fn p0() -> PromptCandidate {
        PromptCandidate::initial("c0", "Step 1. Read the question.").unwrap()
    }

    fn failure(id: &str) -> FailureCase {
        FailureCase {
            example: Example::new(id, format!("question {id}"), "B"),
            model_output: "A".into(),
            extracted_answer: "a".into(),
        }
    }

    fn pattern(id: &str, importance: f64) -> Pattern {
        Pattern::new(id, format!("pattern {id}"), importance, vec![]).unwrap()
    }

    #[test]
    fn analyze_parses_reasons_in_order() {
        let (model, log) =
            scripted("<START>misses re-finding pattern<END><START>ignores domain preference<END>");
        let reasons = agents(&model).analyze(&p0(), &[failure("f1"), failure("f2")], "i1-").unwrap();
        assert_eq!(reasons.len(), 2);
        assert_eq!(reasons[0].text, "misses re-finding pattern");
        assert_eq!(reasons[1].id, "i1-r2");
        assert_eq!(reasons[0].failure_ids, vec!["f1", "f2"]);
        let req = &log.lock().unwrap()[0];
        assert_eq!(req.request_tag, RequestTag::Analyzer);
        assert_eq!(req.temperature, 1.0);
        assert!(req.messages[0].content.contains("Input: question f1\nModel answer: A\nCorrect answer: B"));
        assert!(req.messages[0].content.contains("Input: question f2"));
    }

    #[test]
    fn analyze_without_tags_fails_with_raw_output() {
        let (model, _) = scripted("I think it is fine.");
        let err = agents(&model).analyze(&p0(), &[failure("f1")], "").unwrap_err();
        assert_eq!(err, AgentError::NoReasonsParsed { raw: "I think it is fine.".into() });
        let (model, _) = scripted("x");
        assert!(matches!(
            agents(&model).analyze(&p0(), &[], ""),
            Err(AgentError::Precondition(_))
        ));
    }

    fn reasons() -> Vec<Reason> {
        vec![Reason { id: "r1".into(), text: "a".into(), failure_ids: vec![] }]
    }

    #[test]
    fn summarize_scores() {
        let (model, log) = scripted("<START>Fails on clinical treatment questions | importance: 9<END>");
        let patterns = agents(&model).summarize(&p0(), &reasons(), "").unwrap();
        assert_eq!(patterns.len(), 1);
        assert_eq!(patterns[0].importance, 9.0);
        assert_eq!(patterns[0].source_reason_ids, vec!["r1"]);
        let req = &log.lock().unwrap()[0];
        assert_eq!(req.request_tag, RequestTag::Summarizer);
        assert_eq!(req.temperature, 0.0);
        assert!(req.messages[0].content.contains("---Reasons---\n1. a\n---Reasons---"));

        let (model, _) = scripted("<START>first importance: 3<END> and <START>second, importance=7<END>");
        let patterns = agents(&model).summarize(&p0(), &reasons(), "").unwrap();
        assert_eq!(
            patterns.iter().map(|p| p.importance).collect::<Vec<_>>(),
            vec![3.0, 7.0]
        );

        let (model, _) = scripted("<START>no score here<END>");
        let patterns = agents(&model).summarize(&p0(), &reasons(), "").unwrap();
        assert_eq!(patterns[0].importance, 0.0);

        let (model, _) = scripted("nothing");
        assert!(matches!(
            agents(&model).summarize(&p0(), &reasons(), ""),
            Err(AgentError::NoPatternsParsed { .. })
        ));
    }

    #[test]
    fn select_top_score_and_ties() {
        let ps = vec![pattern("p1", 0.9), pattern("p2", 0.5)];
        let picked = select_patterns(&ps, 1, PatternStrategy::TopScore, 0);
        assert_eq!(picked[0].id, "p1");
        let ps = vec![pattern("p1", 5.0), pattern("p2", 5.0)];
        assert_eq!(select_patterns(&ps, 1, PatternStrategy::TopScore, 0)[0].id, "p1");
        let ps = vec![pattern("p1", 1.0), pattern("p2", 3.0), pattern("p3", 3.0)];
        let ids: Vec<_> = select_patterns(&ps, 5, PatternStrategy::TopScore, 0)
            .into_iter()
            .map(|p| p.id)
            .collect();
        assert_eq!(ids, vec!["p2", "p3", "p1"]);
    }

    #[test]
    fn select_random_is_seeded() {
        let ps: Vec<_> = (0..4).map(|i| pattern(&format!("p{i}"), i as f64)).collect();
        let a = select_patterns(&ps, 2, PatternStrategy::Random, 11);
        assert_eq!(a.len(), 2);
        assert_eq!(a, select_patterns(&ps, 2, PatternStrategy::Random, 11));
        assert_ne!(a[0].id, a[1].id);
    }

    #[test]
    fn revise_builds_child() {
        let (model, log) = scripted("Step 1. If clinical… Otherwise…");
        let parent = p0();
        let child = agents(&model).revise(&parent, &[pattern("p1", 9.0)], "c1", 1).unwrap();
        assert_eq!(child.parent_id.as_deref(), Some("c0"));
        assert_eq!(child.branch_count, 2);
        assert_eq!(child.applied_patterns, vec!["p1"]);
        assert_eq!(child.iteration_created, 1);
        assert_eq!(parent, p0());
        let req = &log.lock().unwrap()[0];
        assert_eq!(req.request_tag, RequestTag::Revisor);
        assert_eq!(req.temperature, 0.0);
        assert!(req.messages[0].content.contains("---ExpertAnalysisStart---\n1. pattern p1\n"));
    }

    #[test]
    fn revise_echo_and_empty() {
        let (model, _) = scripted("Step 1. Read the question.");
        let child = agents(&model).revise(&p0(), &[pattern("p1", 1.0)], "c1", 1).unwrap();
        assert_eq!(child.text, p0().text);
        let (model, _) = scripted("  \n ");
        assert_eq!(
            agents(&model).revise(&p0(), &[pattern("p1", 1.0)], "c1", 1),
            Err(AgentError::EmptyRevision)
        );
    }

    #[test]
    fn code_fences_are_stripped() {
        assert_eq!(strip_code_fence("```text\nStep 1. Go.\n```"), "Step 1. Go.");
        assert_eq!(strip_code_fence("```\nA\nB\n```\n"), "A\nB");
        assert_eq!(strip_code_fence("Use ```x``` here"), "Use ```x``` here");
        assert_eq!(strip_code_fence("```a\n```\nmid\n```b\n```"), "```a\n```\nmid\n```b\n```");
    }

    fn task(n: usize) -> TaskSpec {
        let train = (0..n).map(|i| Example::new(format!("t{i}"), format!("input {i}"), "yes")).collect();
        TaskSpec::new(
            "toy",
            "Decide yes or no.",
            DatasetSplits::new(train, vec![], vec![]).unwrap(),
            Some(vec!["yes".into(), "no".into()]),
            AnswerExtraction::default(),
        )
        .unwrap()
    }

    #[test]
    fn initializer_is_seeded() {
        let (model, log) = scripted("Classify the question…");
        let a = agents(&model);
        let p = a.initialize_prompt(&task(100), 5, 7, "c0").unwrap();
        assert!(p.parent_id.is_none());
        assert_eq!(p.iteration_created, 0);
        a.initialize_prompt(&task(100), 5, 7, "c0").unwrap();
        let log = log.lock().unwrap();
        assert_eq!(log[0], log[1]);
        assert_eq!(log[0].request_tag, RequestTag::Initializer);
        assert_eq!(log[0].messages[0].content.matches("Input: input ").count(), 5);
        assert!(matches!(
            a.initialize_prompt(&task(3), 5, 7, "c0"),
            Err(AgentError::Precondition(_))
        ));
    }
}
