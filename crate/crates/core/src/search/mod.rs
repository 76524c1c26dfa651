//! Search strategies over prompt candidates, the event log they write, and
//! exploration-budget accounting.
//!
//! Every strategy shares one event grammar. After a `run_started` header and
//! the scored root candidate (iteration 0), each iteration is one or more
//! expansion blocks followed by a `selection`:
//!
//! ```text
//! evaluation failure_sample [analysis patterns candidate+]  ...  selection
//! ```
//!
//! A block whose `failure_sample` is empty has nothing to expand. The log
//! ends with `run_finished`. [`replay`] re-derives every selection from the
//! candidate scores alone.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, Agents, Reason};
use crate::eval::{sample_failures, EvalError, EvalReport, Evaluator};
use crate::llm::{CallCounter, LanguageModel};
use crate::rng::derive_seed;
use crate::template::TemplateSet;
use crate::types::{
    CandidateSource, DataError, FailureCase, Pattern, PromptCandidate, RunConfig, Split, TaskSpec,
};

mod ampo;
mod beam;
pub mod mcts;
mod prune;
pub mod replay;

pub use ampo::run_ampo;
pub use beam::run_apo_beam;
pub use mcts::run_mcts_lite;
pub use prune::pre_prune_check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Ampo,
    ApoBeam,
    MctsLite,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ampo => "ampo",
            Strategy::ApoBeam => "apo_beam",
            Strategy::MctsLite => "mcts_lite",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ampo" => Ok(Self::Ampo),
            "apo_beam" | "apo-beam" => Ok(Self::ApoBeam),
            "mcts_lite" | "mcts-lite" => Ok(Self::MctsLite),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// Strategy-specific knobs, recorded in the run header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum StrategyParams {
    Ampo,
    ApoBeam {
        beam_width: usize,
        expansions_per_prompt: usize,
        /// Revisions drawn per reason-conditioned expansion.
        expansion_multiplier: usize,
    },
    MctsLite {
        depth: u32,
        breadth: usize,
        total_budget: usize,
        exploration_weight: f64,
    },
}

impl StrategyParams {
    pub fn strategy(&self) -> Strategy {
        match self {
            StrategyParams::Ampo => Strategy::Ampo,
            StrategyParams::ApoBeam { .. } => Strategy::ApoBeam,
            StrategyParams::MctsLite { .. } => Strategy::MctsLite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationsExhausted,
    PrePruned,
    NoFailures,
    Error,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::IterationsExhausted => "iterations_exhausted",
            StopReason::PrePruned => "pre_pruned",
            StopReason::NoFailures => "no_failures",
            StopReason::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationBudget {
    pub iteration: u32,
    pub candidates: usize,
    pub val_evals: usize,
}

/// Exploration budget of a run. Only completed iterations are counted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub candidates_generated: usize,
    pub target_calls: u64,
    pub optimizer_calls: u64,
    pub per_iteration: Vec<IterationBudget>,
}

impl BudgetLedger {
    fn push(&mut self, entry: IterationBudget) {
        self.candidates_generated += entry.candidates;
        self.per_iteration.push(entry);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    RunStarted,
    Evaluation,
    FailureSample,
    Analysis,
    Patterns,
    Candidate,
    Selection,
    RunFinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    RunStarted {
        params: StrategyParams,
        config: RunConfig,
        train_size: usize,
        validation_size: usize,
    },
    Evaluation {
        prompt_id: String,
        split: Split,
        n: usize,
        correct: usize,
        accuracy: f64,
        cached: bool,
    },
    FailureSample {
        prompt_id: String,
        failure_ids: Vec<String>,
    },
    Analysis {
        prompt_id: String,
        reasons: Vec<Reason>,
    },
    Patterns {
        prompt_id: String,
        patterns: Vec<Pattern>,
        selected: Vec<String>,
    },
    Candidate(PromptCandidate),
    Selection {
        incumbent_id: String,
        incumbent_score: f64,
        global_best_id: String,
        global_best_score: f64,
        retained: Vec<String>,
    },
    RunFinished {
        stop_reason: StopReason,
        incumbent_id: String,
        global_best_id: String,
        ledger: BudgetLedger,
        error: Option<String>,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::RunStarted { .. } => EventKind::RunStarted,
            EventBody::Evaluation { .. } => EventKind::Evaluation,
            EventBody::FailureSample { .. } => EventKind::FailureSample,
            EventBody::Analysis { .. } => EventKind::Analysis,
            EventBody::Patterns { .. } => EventKind::Patterns,
            EventBody::Candidate(_) => EventKind::Candidate,
            EventBody::Selection { .. } => EventKind::Selection,
            EventBody::RunFinished { .. } => EventKind::RunFinished,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub iteration: u32,
    #[serde(flatten)]
    pub body: EventBody,
    pub timestamp: u64,
}

/// Receives events (and fresh evaluation reports) as they happen, so a run
/// that dies midway still leaves its prefix behind.
pub trait EventSink {
    fn record(&mut self, event: &Event);

    fn report(&mut self, _report: &EvalReport) {}
}

impl EventSink for Vec<Event> {
    fn record(&mut self, event: &Event) {
        self.push(event.clone());
    }
}

pub trait Clock: Sync {
    fn now_ms(&self) -> u64;
}

/// A clock that never moves; keeps test logs byte-stable.
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

/// Everything a run needs besides the task, the root prompt and the config.
pub struct SearchEnv<'a> {
    pub run_id: String,
    pub model: &'a dyn LanguageModel,
    pub target_model: String,
    pub optimizer_model: String,
    pub templates: TemplateSet,
    pub parallelism: usize,
    pub max_tokens: Option<u32>,
    pub clock: &'a dyn Clock,
}

/// The outcome of a run, including its full event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: RunConfig,
    pub params: StrategyParams,
    pub strategy: Strategy,
    pub events: Vec<Event>,
    pub incumbent_id: String,
    pub global_best_id: String,
    pub ledger: BudgetLedger,
    pub stop_reason: StopReason,
    pub error: Option<String>,
    pub candidates: Vec<PromptCandidate>,
}

impl RunRecord {
    pub fn candidate(&self, id: &str) -> Option<&PromptCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn global_best(&self) -> &PromptCandidate {
        self.candidate(&self.global_best_id)
            .expect("global best is always a recorded candidate")
    }

    pub fn incumbent(&self) -> &PromptCandidate {
        self.candidate(&self.incumbent_id)
            .expect("incumbent is always a recorded candidate")
    }
}

/// Reasons a run cannot start. Failures after the start end the run with
/// `StopReason::Error` instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid strategy parameters: {0}")]
    Params(String),
}

#[derive(Debug)]
pub(crate) enum Failure {
    Agent(AgentError),
    Eval(EvalError),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Agent(e) => write!(f, "agent error: {e}"),
            Failure::Eval(e) => write!(f, "evaluation error: {e}"),
        }
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        Failure::Agent(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Eval(e)
    }
}

/// Index of the first maximum; NaN-free scores assumed.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Shared bookkeeping for all strategies: ids, caches, global best, events.
pub(crate) struct Runner<'r, 'a> {
    env: &'r SearchEnv<'a>,
    pub(crate) agents: Agents<'r>,
    evaluator: Evaluator<'r>,
    counter: &'r CallCounter<&'a dyn LanguageModel>,
    pub(crate) task: TaskSpec,
    pub(crate) config: RunConfig,
    params: StrategyParams,
    sink: &'r mut dyn EventSink,
    events: Vec<Event>,
    candidates: Vec<PromptCandidate>,
    train_cache: BTreeMap<String, EvalReport>,
    ledger: BudgetLedger,
    next_id: usize,
    global_best: Option<(String, f64)>,
    pub(crate) incumbent_id: String,
}

impl<'r, 'a> Runner<'r, 'a> {
    pub(crate) fn new(
        env: &'r SearchEnv<'a>,
        counter: &'r CallCounter<&'a dyn LanguageModel>,
        task: &TaskSpec,
        config: &RunConfig,
        params: StrategyParams,
        sink: &'r mut dyn EventSink,
    ) -> Result<Self, RunError> {
        config.validate()?;
        if task.splits.train().is_empty() {
            return Err(DataError::EmptyTrain.into());
        }
        let task = if task.splits.validation().is_empty() {
            task.with_splits(task.splits.carve_validation(config.val_fraction, config.seed)?)
        } else {
            task.clone()
        };
        if env.parallelism == 0 {
            return Err(RunError::Params("parallelism must be >= 1".to_string()));
        }
        let evaluator = Evaluator {
            model: counter,
            target_model: env.target_model.clone(),
            temperature: config.target_temperature,
            max_tokens: env.max_tokens,
            parallelism: env.parallelism,
        };
        let mut agents = Agents::new(counter, env.optimizer_model.clone(), env.templates.clone(), config);
        agents.max_tokens = env.max_tokens;
        Ok(Self {
            env,
            agents,
            evaluator,
            counter,
            task,
            config: config.clone(),
            params,
            sink,
            events: Vec::new(),
            candidates: Vec::new(),
            train_cache: BTreeMap::new(),
            ledger: BudgetLedger::default(),
            next_id: 1,
            global_best: None,
            incumbent_id: String::new(),
        })
    }

    fn emit(&mut self, iteration: u32, body: EventBody) {
        let event = Event {
            iteration,
            body,
            timestamp: self.env.clock.now_ms(),
        };
        self.sink.record(&event);
        self.events.push(event);
    }

    pub(crate) fn start(&mut self, p0: &PromptCandidate) -> Result<PromptCandidate, RunError> {
        if p0.source != CandidateSource::Initial {
            return Err(RunError::Params("the root prompt must be an initial candidate".into()));
        }
        p0.check()?;
        self.emit(
            0,
            EventBody::RunStarted {
                params: self.params.clone(),
                config: self.config.clone(),
                train_size: self.task.splits.train().len(),
                validation_size: self.task.splits.validation().len(),
            },
        );
        let mut root = p0.clone();
        root.id = "c0".into();
        root.val_score = None;
        root.train_score = None;
        self.incumbent_id = root.id.clone();
        Ok(root)
    }

    pub(crate) fn fresh_id(&mut self) -> String {
        let id = format!("c{}", self.next_id);
        self.next_id += 1;
        id
    }

    /// Train-split report for `candidate`, cached by prompt id.
    pub(crate) fn train_report(
        &mut self,
        candidate: &PromptCandidate,
        iteration: u32,
    ) -> Result<EvalReport, Failure> {
        let (report, cached) = match self.train_cache.get(&candidate.id) {
            Some(r) => (r.clone(), true),
            None => {
                let r = self.evaluator.evaluate(candidate, &self.task, Split::Train)?;
                self.sink.report(&r);
                self.train_cache.insert(candidate.id.clone(), r.clone());
                if let Some(c) = self.candidates.iter_mut().find(|c| c.id == candidate.id) {
                    c.train_score = Some(r.accuracy);
                }
                (r, false)
            }
        };
        self.emit(
            iteration,
            EventBody::Evaluation {
                prompt_id: candidate.id.clone(),
                split: Split::Train,
                n: report.n,
                correct: report.correct,
                accuracy: report.accuracy,
                cached,
            },
        );
        Ok(report)
    }

    /// Samples failures for one expansion slot; `None` means the prompt is
    /// perfect on the training split.
    pub(crate) fn sample(
        &mut self,
        report: &EvalReport,
        iteration: u32,
        slot: u64,
    ) -> Result<Option<Vec<FailureCase>>, Failure> {
        let seed = derive_seed(self.config.seed, ((iteration as u64) << 20) | slot);
        let sampled = match sample_failures(report, self.config.failures_per_iter, seed) {
            Ok(f) => Some(f),
            Err(EvalError::NoFailures) => None,
            Err(e) => return Err(e.into()),
        };
        let failure_ids = sampled
            .iter()
            .flatten()
            .map(|f| f.example.id.clone())
            .collect();
        self.emit(
            iteration,
            EventBody::FailureSample {
                prompt_id: report.prompt_id.clone(),
                failure_ids,
            },
        );
        Ok(sampled)
    }

    pub(crate) fn analyze(
        &mut self,
        prompt: &PromptCandidate,
        failures: &[FailureCase],
        iteration: u32,
        scope: &str,
    ) -> Result<Vec<Reason>, Failure> {
        let reasons = self.agents.analyze(prompt, failures, scope)?;
        self.emit(
            iteration,
            EventBody::Analysis {
                prompt_id: prompt.id.clone(),
                reasons: reasons.clone(),
            },
        );
        Ok(reasons)
    }

    pub(crate) fn record_patterns(
        &mut self,
        prompt: &PromptCandidate,
        patterns: &[Pattern],
        selected: &[Pattern],
        iteration: u32,
    ) {
        self.emit(
            iteration,
            EventBody::Patterns {
                prompt_id: prompt.id.clone(),
                patterns: patterns.to_vec(),
                selected: selected.iter().map(|p| p.id.clone()).collect(),
            },
        );
    }

    /// Validation-scores a new candidate, logs it and updates the global best
    /// (strictly better replaces; ties keep the earlier candidate).
    pub(crate) fn score(
        &mut self,
        mut candidate: PromptCandidate,
        iteration: u32,
    ) -> Result<PromptCandidate, Failure> {
        let report = self.evaluator.evaluate(&candidate, &self.task, Split::Validation)?;
        self.sink.report(&report);
        candidate.val_score = Some(report.accuracy);
        if self.global_best.as_ref().is_none_or(|(_, best)| report.accuracy > *best) {
            self.global_best = Some((candidate.id.clone(), report.accuracy));
        }
        self.emit(iteration, EventBody::Candidate(candidate.clone()));
        self.candidates.push(candidate.clone());
        Ok(candidate)
    }

    pub(crate) fn select(&mut self, iteration: u32, incumbent: &PromptCandidate, retained: Vec<String>) {
        self.incumbent_id = incumbent.id.clone();
        let (global_best_id, global_best_score) = self.global_best.clone().unwrap_or_default();
        self.emit(
            iteration,
            EventBody::Selection {
                incumbent_id: incumbent.id.clone(),
                incumbent_score: incumbent.val_score.unwrap_or_default(),
                global_best_id,
                global_best_score,
                retained,
            },
        );
    }

    pub(crate) fn complete_iteration(&mut self, iteration: u32, candidates: usize) {
        self.ledger.push(IterationBudget {
            iteration,
            candidates,
            val_evals: candidates,
        });
    }

    pub(crate) fn finish(mut self, outcome: Result<StopReason, Failure>) -> RunRecord {
        let (stop_reason, error) = match outcome {
            Ok(reason) => (reason, None),
            Err(failure) => (StopReason::Error, Some(failure.to_string())),
        };
        self.ledger.target_calls = self.counter.target_calls();
        self.ledger.optimizer_calls = self.counter.optimizer_calls();
        let global_best_id = self
            .global_best
            .as_ref()
            .map(|(id, _)| id.clone())
            .unwrap_or_default();
        self.emit(
            self.ledger.per_iteration.last().map_or(0, |b| b.iteration),
            EventBody::RunFinished {
                stop_reason,
                incumbent_id: self.incumbent_id.clone(),
                global_best_id: global_best_id.clone(),
                ledger: self.ledger.clone(),
                error: error.clone(),
            },
        );
        RunRecord {
            run_id: self.env.run_id.clone(),
            config: self.config,
            strategy: self.params.strategy(),
            params: self.params,
            events: self.events,
            incumbent_id: self.incumbent_id,
            global_best_id,
            ledger: self.ledger,
            stop_reason,
            error,
            candidates: self.candidates,
        }
    }
}

/// Wraps each reason as a zero-importance pattern; baselines revise from
/// raw reasons without summarizing them.
pub(crate) fn reasons_as_patterns(reasons: &[Reason], scope: &str) -> Vec<Pattern> {
    reasons
        .iter()
        .enumerate()
        .map(|(i, r)| Pattern {
            id: format!("{scope}p{}", i + 1),
            description: r.text.clone(),
            importance: 0.0,
            source_reason_ids: alloc::vec![r.id.clone()],
        })
        .collect()
}
