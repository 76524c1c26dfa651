use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    reasons_as_patterns, EventSink, Failure, RunError, RunRecord, Runner, SearchEnv, StopReason,
    StrategyParams,
};
use crate::llm::CallCounter;
use crate::template::TemplateRole;
use crate::types::{PromptCandidate, RunConfig, TaskSpec};

/// Beam search over single-reason edits.
///
/// Each iteration fills `beam_width` expansion slots round-robin over the
/// current beam. A slot samples failures of its prompt, asks for reasons and
/// writes `expansions_per_prompt * expansion_multiplier` edits, cycling
/// through the reasons. The next beam is the top `beam_width` of the old
/// beam plus all new candidates (stable, old members first).
#[allow(clippy::too_many_arguments)]
pub fn run_apo_beam(
    env: &SearchEnv<'_>,
    task: &TaskSpec,
    p0: &PromptCandidate,
    config: &RunConfig,
    beam_width: usize,
    expansions_per_prompt: usize,
    expansion_multiplier: usize,
    sink: &mut dyn EventSink,
) -> Result<RunRecord, RunError> {
    if beam_width == 0 || expansions_per_prompt == 0 || expansion_multiplier == 0 {
        return Err(RunError::Params(
            "beam width, expansions and expansion multiplier must be >= 1".into(),
        ));
    }
    let params = StrategyParams::ApoBeam {
        beam_width,
        expansions_per_prompt,
        expansion_multiplier,
    };
    let counter = CallCounter::new(env.model);
    let mut run = Runner::new(env, &counter, task, config, params, sink)?;
    let root = run.start(p0)?;
    let outcome = beam(&mut run, root, beam_width, expansions_per_prompt, expansion_multiplier);
    Ok(run.finish(outcome))
}

fn beam(
    run: &mut Runner<'_, '_>,
    root: PromptCandidate,
    width: usize,
    expansions: usize,
    multiplier: usize,
) -> Result<StopReason, Failure> {
    let mut beam = vec![run.score(root, 0)?];
    for t in 1..=run.config.iterations {
        let mut fresh = Vec::new();
        for slot in 0..width {
            let member = beam[slot % beam.len()].clone();
            let report = run.train_report(&member, t)?;
            let Some(failures) = run.sample(&report, t, slot as u64)? else {
                continue;
            };
            let scope = format!("i{t}s{slot}-");
            let reasons = run.analyze(&member, &failures, t, &scope)?;
            let patterns = reasons_as_patterns(&reasons, &scope);
            let used = expansions.min(patterns.len());
            run.record_patterns(&member, &patterns, &patterns[..used], t);
            for e in 0..expansions {
                let pattern = &patterns[e % patterns.len()];
                for _ in 0..multiplier {
                    let id = run.fresh_id();
                    let edited = run.agents.rewrite(
                        TemplateRole::Editor,
                        &member,
                        core::slice::from_ref(pattern),
                        &id,
                        t,
                    )?;
                    fresh.push(run.score(edited, t)?);
                }
            }
        }
        if fresh.is_empty() {
            return Ok(StopReason::NoFailures);
        }
        let generated = fresh.len();
        let mut pool = core::mem::take(&mut beam);
        pool.extend(fresh);
        pool.sort_by(|a, b| score(b).total_cmp(&score(a)));
        pool.truncate(width);
        beam = pool;
        let retained = beam.iter().map(|c| c.id.clone()).collect();
        let top = beam[0].clone();
        run.select(t, &top, retained);
        run.complete_iteration(t, generated);
    }
    Ok(StopReason::IterationsExhausted)
}

fn score(c: &PromptCandidate) -> f64 {
    c.val_score.unwrap_or_default()
}
