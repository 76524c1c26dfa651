use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    argmax_first, pre_prune_check, EventSink, Failure, RunError, RunRecord, Runner, SearchEnv,
    StopReason, StrategyParams,
};
use crate::agents::select_patterns;
use crate::llm::CallCounter;
use crate::rng::derive_seed;
use crate::types::{PromptCandidate, RunConfig, TaskSpec};

/// Greedy multi-branch optimization: each iteration revises the incumbent
/// once per selected failure pattern and moves to the best revision.
pub fn run_ampo(
    env: &SearchEnv<'_>,
    task: &TaskSpec,
    p0: &PromptCandidate,
    config: &RunConfig,
    sink: &mut dyn EventSink,
) -> Result<RunRecord, RunError> {
    let counter = CallCounter::new(env.model);
    let mut run = Runner::new(env, &counter, task, config, StrategyParams::Ampo, sink)?;
    let root = run.start(p0)?;
    let outcome = greedy(&mut run, root);
    Ok(run.finish(outcome))
}

fn greedy(run: &mut Runner<'_, '_>, root: PromptCandidate) -> Result<StopReason, Failure> {
    let mut incumbent = run.score(root, 0)?;
    let mut history = vec![incumbent.val_score.unwrap_or_default()];
    let iterations = run.config.iterations;
    for t in 1..=iterations {
        let report = run.train_report(&incumbent, t)?;
        let Some(failures) = run.sample(&report, t, 0)? else {
            return Ok(StopReason::NoFailures);
        };
        let scope = format!("i{t}-");
        let reasons = run.analyze(&incumbent, &failures, t, &scope)?;
        let patterns = run.agents.summarize(&incumbent, &reasons, &scope)?;
        let selected = select_patterns(
            &patterns,
            run.config.top_patterns,
            run.config.pattern_strategy,
            derive_seed(run.config.seed, t as u64),
        );
        run.record_patterns(&incumbent, &patterns, &selected, t);

        let mut candidates = Vec::with_capacity(selected.len());
        for pattern in &selected {
            let id = run.fresh_id();
            let revised = run.agents.revise(&incumbent, core::slice::from_ref(pattern), &id, t)?;
            candidates.push(run.score(revised, t)?);
        }
        let scores: Vec<f64> = candidates.iter().map(|c| c.val_score.unwrap_or_default()).collect();
        let best = argmax_first(&scores).expect("at least one pattern is always selected");
        incumbent = candidates.swap_remove(best);
        run.select(t, &incumbent, vec![incumbent.id.clone()]);
        run.complete_iteration(t, scores.len());

        history.push(scores[best]);
        if t < iterations && pre_prune_check(&history, &run.config.pre_prune) {
            return Ok(StopReason::PrePruned);
        }
    }
    Ok(StopReason::IterationsExhausted)
}
