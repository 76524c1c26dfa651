//! Multi-branched prompt optimization.
//!
//! A task prompt is refined iteratively from its own failure cases by three
//! cooperating optimizer roles: an *analyzer* that explains individual
//! failures, a *summarizer* that condenses the explanations into scored error
//! patterns, and a *revisor* that grows (and prunes) conditional branches in
//! the prompt to cover the selected patterns. The greedy loop keeps one
//! incumbent prompt per iteration and returns the best prompt seen on the
//! validation split.
//!
//! This crate holds the pure part of the system and only needs `alloc`:
//!
//! - [`types`]: datasets, tasks, prompt candidates, patterns, run configuration
//! - [`text`]: label normalization and the branch-count structure metric
//! - [`llm`]: the [`LanguageModel`](llm::LanguageModel) trait and chat wire types
//! - [`eval`]: answer extraction, exact-match scoring, failure sampling
//! - [`template`] / [`parse`] / [`agents`]: meta-prompts and the agent roles
//! - [`search`]: the greedy loop, beam and tree baselines, budget ledger, replay
//!
//! Transports, file formats and the command line live in the `ampo` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod eval;
pub mod llm;
pub mod parse;
pub mod rng;
pub mod search;
pub mod template;
pub mod text;
pub mod types;

pub use agents::{Agents, Reason};
pub use eval::{EvalError, EvalReport, Evaluator};
pub use llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel, RequestTag};
pub use search::{BudgetLedger, Event, EventBody, RunRecord, StopReason, Strategy};
pub use template::{MetaPromptTemplate, TemplateRole, TemplateSet};
pub use types::{
    DataError, DatasetSplits, Example, FailureCase, Pattern, PatternStrategy, PrePruneRule,
    PromptCandidate, RunConfig, Split, TaskSpec,
};
