#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ampo_core::eval::AnswerExtraction;
use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel, RequestTag};
use ampo_core::search::{FixedClock, SearchEnv};
use ampo_core::{DatasetSplits, Example, PromptCandidate, TaskSpec, TemplateSet};

pub static CLOCK: FixedClock = FixedClock(0);

fn gold(input: &str) -> &'static str {
    let n: usize = input[1..].parse().unwrap();
    if n.is_multiple_of(2) {
        "a"
    } else {
        "b"
    }
}

fn split(prefix: &str, n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let input = format!("{prefix}{i}");
            Example::new(format!("{prefix}-{i}"), input.clone(), gold(&input))
        })
        .collect()
}

/// 20 train, 10 validation and 5 test examples with labels `a`/`b`.
pub fn task() -> TaskSpec {
    task_sized(20, 10)
}

pub fn task_sized(train: usize, validation: usize) -> TaskSpec {
    let splits = DatasetSplits::new(split("t", train), split("v", validation), split("s", 5)).unwrap();
    TaskSpec::new(
        "toy",
        "Label each input.",
        splits,
        Some(vec!["a".into(), "b".into()]),
        AnswerExtraction::default(),
    )
    .unwrap()
}

/// A prompt that the scripted target answers correctly on the first `k`
/// validation inputs, plus every training input when `train` is set.
pub fn prompt_scoring(k: usize, train: bool) -> String {
    let mut text = String::from("Classify.");
    for i in 0..k {
        text.push_str(&format!(" [v{i}]"));
    }
    if train {
        text.push_str(" [train]");
    }
    text
}

pub fn p0() -> PromptCandidate {
    PromptCandidate::initial("p0", prompt_scoring(0, false)).unwrap()
}

pub enum Reply {
    Text(String),
    Outage,
}

/// A deterministic stand-in for every role.
///
/// The target answers an input correctly iff the prompt mentions it (or
/// `[train]` for training inputs). Revisions come from a queue and, once it
/// runs dry, are fresh zero-scoring prompts.
pub struct World {
    revisions: Mutex<VecDeque<Reply>>,
    pub summary: String,
    pub analysis: String,
    fresh: AtomicUsize,
    pub log: Mutex<Vec<ChatRequest>>,
}

impl World {
    pub fn new(revisions: Vec<Reply>) -> Self {
        Self {
            revisions: Mutex::new(revisions.into()),
            summary: "<START>Cue words are ignored. importance: 0.9<END>\n<START>Rules are vague. importance: 0.4<END>".into(),
            analysis: "<START>misses the cue<END>\n<START>ignores the rule<END>".into(),
            fresh: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn scoring(steps: &[usize]) -> Self {
        Self::new(steps.iter().map(|&k| Reply::Text(prompt_scoring(k, false))).collect())
    }

    pub fn requests(&self, tag: RequestTag) -> Vec<ChatRequest> {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.request_tag == tag)
            .cloned()
            .collect()
    }
}

impl LanguageModel for World {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.log.lock().unwrap().push(request.clone());
        let content = &request.messages[0].content;
        let reply = match request.request_tag {
            RequestTag::Target => {
                let (prompt, input) = content.rsplit_once("\n\n").unwrap();
                let known = prompt.contains(&format!("[{input}]"))
                    || (input.starts_with('t') && prompt.contains("[train]"));
                let right = gold(input);
                let wrong = if right == "a" { "b" } else { "a" };
                format!("Answer: {}", if known { right } else { wrong })
            }
            RequestTag::Analyzer => self.analysis.clone(),
            RequestTag::Summarizer => self.summary.clone(),
            RequestTag::Revisor => match self.revisions.lock().unwrap().pop_front() {
                Some(Reply::Text(t)) => t,
                Some(Reply::Outage) => return Err(GatewayError::Transport("scripted outage".into())),
                None => format!("Classify. [gen{}]", self.fresh.fetch_add(1, Ordering::Relaxed)),
            },
            RequestTag::Initializer => prompt_scoring(0, false),
        };
        Ok(ChatResponse::text(reply))
    }
}

pub fn env(model: &dyn LanguageModel) -> SearchEnv<'_> {
    SearchEnv {
        run_id: "test".into(),
        model,
        target_model: "target".into(),
        optimizer_model: "optimizer".into(),
        templates: TemplateSet::default(),
        parallelism: 4,
        max_tokens: None,
        clock: &CLOCK,
    }
}
