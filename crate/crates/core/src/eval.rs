//! Exact-match scoring of a prompt over a dataset split.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{ChatRequest, GatewayError, LanguageModel, RequestTag};
use crate::rng::{self, Stream};
use crate::text::normalize_label;
use crate::types::{Example, FailureCase, PromptCandidate, Split, TaskSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{0} split empty")]
    EmptySplit(Split),
    #[error("parallelism must be >= 1")]
    ZeroParallelism,
    #[error("k must be >= 1")]
    ZeroSample,
    #[error("bad extraction pattern: {0}")]
    BadPattern(String),
    #[error("backend failed on example `{example_id}`: {source}")]
    Backend {
        example_id: String,
        source: GatewayError,
    },
    #[error("no failures to sample")]
    NoFailures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionFallback {
    #[default]
    LastLabelMention,
    WholeOutput,
}

impl core::str::FromStr for ExtractionFallback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last_label_mention" => Ok(Self::LastLabelMention),
            "whole_output" => Ok(Self::WholeOutput),
            other => Err(alloc::format!("unknown extraction fallback `{other}`")),
        }
    }
}

/// How the answer is read out of a completion: a regex with exactly one
/// capture group, then a fallback when it does not match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerExtraction {
    pub pattern: String,
    pub fallback: ExtractionFallback,
}

impl Default for AnswerExtraction {
    fn default() -> Self {
        Self {
            pattern: String::from(r"(?i)answer\s*[:=]\s*(.+)"),
            fallback: ExtractionFallback::LastLabelMention,
        }
    }
}

impl AnswerExtraction {
    pub fn compile(&self) -> Result<Extractor, EvalError> {
        let regex = Regex::new(&self.pattern).map_err(|e| EvalError::BadPattern(e.to_string()))?;
        if regex.captures_len() != 2 {
            return Err(EvalError::BadPattern(alloc::format!(
                "`{}` must have exactly one capture group",
                self.pattern
            )));
        }
        Ok(Extractor {
            regex,
            fallback: self.fallback,
        })
    }
}

pub struct Extractor {
    regex: Regex,
    fallback: ExtractionFallback,
}

impl Extractor {
    /// The normalized answer found in `output`.
    pub fn extract(&self, output: &str, labels: Option<&[String]>) -> String {
        if let Some(group) = self.regex.captures(output).and_then(|c| c.get(1)) {
            return normalize_label(group.as_str());
        }
        if self.fallback == ExtractionFallback::LastLabelMention {
            if let Some(label) = labels.and_then(|l| last_label_mention(output, l)) {
                return label;
            }
        }
        normalize_label(output)
    }
}

/// The label whose last occurrence in `output` starts latest; on equal
/// positions the longer label wins.
fn last_label_mention(output: &str, labels: &[String]) -> Option<String> {
    let haystack = output.to_lowercase();
    labels
        .iter()
        .map(|l| normalize_label(l))
        .filter(|l| !l.is_empty())
        .filter_map(|l| haystack.rfind(l.as_str()).map(|pos| (pos, l)))
        .max_by(|(pa, la), (pb, lb)| pa.cmp(pb).then(la.len().cmp(&lb.len())))
        .map(|(_, l)| l)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub id: String,
    pub extracted: String,
    pub gold: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub prompt_id: String,
    pub split: Split,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub failures: Vec<FailureCase>,
    pub per_example: Vec<ExampleOutcome>,
}

/// The prompt followed by a blank line and the example input.
pub fn compose_target_message(prompt: &str, input: &str) -> String {
    alloc::format!("{prompt}\n\n{input}")
}

/// Issues target-model completions and scores them.
pub struct Evaluator<'a> {
    pub model: &'a dyn LanguageModel,
    pub target_model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub parallelism: usize,
}

impl Evaluator<'_> {
    /// Scores `prompt` on one split of `task`. A failed batch is retried once
    /// as a whole before the evaluation is abandoned.
    pub fn evaluate(
        &self,
        prompt: &PromptCandidate,
        task: &TaskSpec,
        split: Split,
    ) -> Result<EvalReport, EvalError> {
        let examples = task.splits.get(split);
        if examples.is_empty() {
            return Err(EvalError::EmptySplit(split));
        }
        if self.parallelism == 0 {
            return Err(EvalError::ZeroParallelism);
        }
        let extractor = task.extraction.compile()?;
        let requests: Vec<ChatRequest> = examples
            .iter()
            .map(|ex| {
                ChatRequest::user(
                    self.target_model.clone(),
                    compose_target_message(&prompt.text, &ex.input),
                    self.temperature,
                    self.max_tokens,
                    RequestTag::Target,
                )
            })
            .collect();

        let outputs = match self.run_batch(&requests, examples) {
            Ok(outputs) => outputs,
            Err(first) => {
                log::warn!("evaluation of `{}` failed ({first}); retrying once", prompt.id);
                self.run_batch(&requests, examples)?
            }
        };

        let labels = task.label_set.as_deref();
        let mut per_example = Vec::with_capacity(examples.len());
        let mut failures = Vec::new();
        for (ex, output) in examples.iter().zip(outputs) {
            let extracted = extractor.extract(&output, labels);
            let gold = normalize_label(&ex.gold);
            let correct = extracted == gold;
            if !correct {
                failures.push(FailureCase {
                    example: ex.clone(),
                    model_output: output,
                    extracted_answer: extracted.clone(),
                });
            }
            per_example.push(ExampleOutcome {
                id: ex.id.clone(),
                extracted,
                gold,
                correct,
            });
        }
        let n = examples.len();
        let correct = n - failures.len();
        Ok(EvalReport {
            prompt_id: prompt.id.clone(),
            split,
            n,
            correct,
            accuracy: correct as f64 / n as f64,
            failures,
            per_example,
        })
    }

    fn run_batch(
        &self,
        requests: &[ChatRequest],
        examples: &[Example],
    ) -> Result<Vec<String>, EvalError> {
        self.model
            .complete_batch(requests, self.parallelism)
            .into_iter()
            .zip(examples)
            .map(|(res, ex)| {
                res.map(|r| r.content).map_err(|source| EvalError::Backend {
                    example_id: ex.id.clone(),
                    source,
                })
            })
            .collect()
    }
}

/// Up to `k` distinct failures drawn uniformly without replacement. The draw
/// depends only on the report, `k` and `seed`.
pub fn sample_failures(
    report: &EvalReport,
    k: usize,
    seed: u64,
) -> Result<Vec<FailureCase>, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroSample);
    }
    if report.failures.is_empty() {
        return Err(EvalError::NoFailures);
    }
    let n = report.failures.len();
    let mut rng = rng::stream(seed, Stream::FailureSampling, 0);
    let mut picked = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| report.failures[i].clone()).collect())
}
