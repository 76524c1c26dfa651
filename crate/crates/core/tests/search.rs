mod common;

use ampo_core::search::replay::{replay, ReplayError};
use ampo_core::search::{run_ampo, run_apo_beam, run_mcts_lite, EventBody, RunRecord, StopReason};
use ampo_core::{RequestTag, RunConfig};
use common::{env, p0, prompt_scoring, task, task_sized, Reply, World};
use proptest::prelude::*;

fn config(iterations: u32) -> RunConfig {
    RunConfig { iterations, ..RunConfig::default() }
}

fn val_scores(record: &RunRecord) -> Vec<f64> {
    record
        .events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::Candidate(c) => c.val_score,
            _ => None,
        })
        .collect()
}

fn ampo(world: &World, cfg: &RunConfig) -> RunRecord {
    let mut log = Vec::new();
    let record = run_ampo(&env(world), &task(), &p0(), cfg, &mut log).unwrap();
    assert_eq!(log, record.events);
    record
}

#[test]
fn five_greedy_iterations_make_five_candidates() {
    let world = World::scoring(&[2, 4, 6, 8, 10]);
    let record = ampo(&world, &config(5));
    assert_eq!(record.stop_reason, StopReason::IterationsExhausted);
    assert_eq!(record.ledger.candidates_generated, 5);
    assert_eq!(record.ledger.per_iteration.len(), 5);
    // p0 on validation, then per iteration: incumbent on train and one candidate on validation.
    assert_eq!(record.ledger.target_calls, 10 + 5 * (20 + 10));
    assert_eq!(record.ledger.optimizer_calls, 5 * 3);
    assert_eq!(val_scores(&record), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    assert_eq!(record.global_best_id, "c5");
    assert_eq!(record.incumbent_id, "c5");
    assert_eq!(record.global_best().parent_id.as_deref(), Some("c4"));
}

#[test]
fn incumbent_follows_latest_iteration_while_global_best_keeps_peak() {
    let world = World::scoring(&[6, 8, 7]);
    let record = ampo(&world, &config(3));
    assert_eq!(record.stop_reason, StopReason::IterationsExhausted);
    assert_eq!(record.incumbent().val_score, Some(0.7));
    assert_eq!(record.global_best().val_score, Some(0.8));
}

#[test]
fn prompt_perfect_on_train_stops_the_run() {
    let world = World::new(vec![
        Reply::Text(prompt_scoring(2, false)),
        Reply::Text(prompt_scoring(3, true)),
    ]);
    let record = ampo(&world, &config(5));
    assert_eq!(record.stop_reason, StopReason::NoFailures);
    assert_eq!(record.ledger.per_iteration.len(), 2);
    assert_eq!(record.ledger.candidates_generated, 2);
    let last_sample = record.events.iter().rev().find_map(|e| match &e.body {
        EventBody::FailureSample { failure_ids, .. } => Some(failure_ids.clone()),
        _ => None,
    });
    assert_eq!(last_sample, Some(vec![]));
    replay(&record.events).unwrap();
}

#[test]
fn stalled_validation_pre_prunes() {
    let world = World::scoring(&[5, 5, 9]);
    let record = ampo(&world, &config(5));
    assert_eq!(record.stop_reason, StopReason::PrePruned);
    assert_eq!(record.ledger.candidates_generated, 2);
}

#[test]
fn zero_patience_stops_after_first_iteration() {
    let world = World::scoring(&[5, 9]);
    let mut cfg = config(5);
    cfg.pre_prune.patience = 0;
    let record = ampo(&world, &cfg);
    assert_eq!(record.stop_reason, StopReason::PrePruned);
    assert_eq!(record.ledger.candidates_generated, 1);
}

#[test]
fn backend_failure_keeps_partial_record() {
    let world = World::new(vec![Reply::Text(prompt_scoring(2, false)), Reply::Outage]);
    let record = ampo(&world, &config(5));
    assert_eq!(record.stop_reason, StopReason::Error);
    assert!(record.error.as_deref().unwrap().contains("scripted outage"));
    assert_eq!(record.ledger.candidates_generated, 1);
    assert_eq!(record.incumbent_id, "c1");
    let last = record.events.last().unwrap();
    assert!(matches!(&last.body, EventBody::RunFinished { error: Some(_), .. }));
    let summary = replay(&record.events).unwrap();
    assert_eq!(summary.incumbents, vec!["c1"]);
}

#[test]
fn ties_between_candidates_go_to_the_first() {
    let world = World::scoring(&[3, 3]);
    let record = ampo(&world, &RunConfig { top_patterns: 2, ..config(1) });
    assert_eq!(record.ledger.candidates_generated, 2);
    assert_eq!(record.incumbent_id, "c1");
    let applied: Vec<_> = record.candidates[1..].iter().map(|c| c.applied_patterns.clone()).collect();
    assert_eq!(applied, vec![vec!["i1-p1".to_string()], vec!["i1-p2".to_string()]]);
}

#[test]
fn analyzer_and_revisor_temperatures_are_routed() {
    let world = World::scoring(&[2, 4]);
    ampo(&world, &config(2));
    let analyzer = world.requests(RequestTag::Analyzer);
    let revisor = world.requests(RequestTag::Revisor);
    assert_eq!(analyzer.len(), 2);
    assert!(analyzer.iter().all(|r| r.temperature == 1.0));
    assert!(revisor.iter().all(|r| r.temperature == 0.0));
    assert!(world.requests(RequestTag::Summarizer).iter().all(|r| r.temperature == 0.0));
    assert!(world.requests(RequestTag::Target).iter().all(|r| r.temperature == 0.0));
}

#[test]
fn empty_validation_split_is_carved_from_train() {
    let world = World::scoring(&[]);
    let mut log = Vec::new();
    let record = run_ampo(&env(&world), &task_sized(20, 0), &p0(), &config(1), &mut log).unwrap();
    match &record.events[0].body {
        EventBody::RunStarted { train_size, validation_size, .. } => {
            assert_eq!((*train_size, *validation_size), (18, 2));
        }
        other => panic!("unexpected first event {other:?}"),
    }
}

#[test]
fn identical_inputs_give_identical_logs() {
    let cfg = RunConfig {
        pattern_strategy: ampo_core::PatternStrategy::Random,
        seed: 42,
        top_patterns: 1,
        ..config(3)
    };
    let a = ampo(&World::scoring(&[1, 2, 3]), &cfg);
    let b = ampo(&World::scoring(&[1, 2, 3]), &cfg);
    assert_eq!(a, b);
}

#[test]
fn beam_first_iteration_expands_round_robin() {
    let world = World::scoring(&[]);
    let mut log = Vec::new();
    let record = run_apo_beam(&env(&world), &task(), &p0(), &config(1), 2, 2, 1, &mut log).unwrap();
    assert_eq!(record.ledger.candidates_generated, 4);
    let candidates = log.iter().filter(|e| matches!(e.body, EventBody::Candidate(_))).count();
    assert_eq!(candidates, 1 + 4);
}

#[test]
fn beam_budget_matches_published_count() {
    let world = World::scoring(&[]);
    let mut log = Vec::new();
    let record = run_apo_beam(&env(&world), &task(), &p0(), &config(5), 4, 3, 4, &mut log).unwrap();
    assert_eq!(record.ledger.candidates_generated, 4 * 3 * 4 * 5);
    assert_eq!(record.ledger.per_iteration.iter().map(|b| b.candidates).collect::<Vec<_>>(), vec![48; 5]);
    replay(&record.events).unwrap();
}

#[test]
fn unit_beam_is_a_chain() {
    let world = World::scoring(&[1, 3, 2]);
    let mut log = Vec::new();
    let record = run_apo_beam(&env(&world), &task(), &p0(), &config(3), 1, 1, 1, &mut log).unwrap();
    assert_eq!(record.ledger.candidates_generated, 3);
    let summary = replay(&record.events).unwrap();
    // The beam keeps the better of the old member and its child.
    assert_eq!(summary.incumbents, vec!["c1", "c2", "c2"]);
    let parents: Vec<_> = record.candidates[1..].iter().map(|c| c.parent_id.clone().unwrap()).collect();
    assert_eq!(parents, vec!["c0", "c1", "c2"]);
}

fn mcts(depth: u32, breadth: usize, budget: usize) -> RunRecord {
    let world = World::scoring(&[]);
    let mut log = Vec::new();
    run_mcts_lite(&env(&world), &task(), &p0(), &config(5), depth, breadth, budget, &mut log).unwrap()
}

#[test]
fn tree_search_budgets() {
    let r = mcts(4, 3, 52);
    assert_eq!(r.ledger.candidates_generated, 52);
    assert_eq!(r.stop_reason, StopReason::IterationsExhausted);
    replay(&r.events).unwrap();

    let r = mcts(4, 3, 1);
    assert_eq!(r.ledger.candidates_generated, 1);
    assert_eq!(r.candidates[1].parent_id.as_deref(), Some("c0"));

    let r = mcts(1, 3, 10);
    assert_eq!(r.ledger.candidates_generated, 3);

    // depth 3, breadth 3 saturates at 3 + 9 + 27 nodes below the root.
    assert_eq!(mcts(3, 3, 52).ledger.candidates_generated, 39);
}

#[test]
fn invalid_parameters_are_rejected_before_running() {
    let world = World::scoring(&[]);
    let mut log = Vec::new();
    assert!(run_mcts_lite(&env(&world), &task(), &p0(), &config(1), 0, 3, 5, &mut log).is_err());
    assert!(run_apo_beam(&env(&world), &task(), &p0(), &config(1), 0, 3, 1, &mut log).is_err());
    assert!(run_ampo(&env(&world), &task(), &p0(), &config(0), &mut log).is_err());
    assert!(log.is_empty());
    assert!(world.log.lock().unwrap().is_empty());
}

#[test]
fn replay_flags_first_divergent_event() {
    let record = ampo(&World::scoring(&[2, 4, 6]), &config(3));
    assert_eq!(replay(&[]), Err(ReplayError::NoEvents));
    let summary = replay(&record.events).unwrap();
    assert_eq!(summary.incumbents, vec!["c1", "c2", "c3"]);
    assert!(summary.finished);

    let mut tampered = record.events.clone();
    let target = tampered
        .iter()
        .position(|e| matches!(&e.body, EventBody::Candidate(c) if c.id == "c3"))
        .unwrap();
    if let EventBody::Candidate(c) = &mut tampered[target].body {
        c.val_score = Some(0.1);
    }
    let err = replay(&tampered).unwrap_err();
    assert!(matches!(err, ReplayError::Mismatch { field: "global_best_id", .. }));
    assert_eq!(err.index(), Some(target + 1));

    let mut reordered = record.events.clone();
    reordered.swap(3, 4);
    assert_eq!(replay(&reordered).unwrap_err().index(), Some(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_budget_law_and_global_best(
        iterations in 1u32..6,
        top in 1usize..3,
        steps in proptest::collection::vec(0usize..=10, 0..12),
        outage in proptest::option::of(0usize..12),
        scale in 0.05f64..1.0,
    ) {
        let mut replies: Vec<Reply> = steps.iter().map(|&k| Reply::Text(prompt_scoring(k, false))).collect();
        if let Some(at) = outage {
            replies.insert(at.min(replies.len()), Reply::Outage);
        }
        let world = World::new(replies);
        let cfg = RunConfig { top_patterns: top, ..config(iterations) };
        let record = ampo(&world, &cfg);

        let completed = record.ledger.per_iteration.len();
        prop_assert_eq!(record.ledger.candidates_generated, completed * top);

        let scores = val_scores(&record);
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(record.global_best().val_score, Some(max));
        prop_assert!(record.global_best().val_score >= record.incumbent().val_score);

        let summary = replay(&record.events).unwrap();
        let mut scaled = record.events.clone();
        for e in &mut scaled {
            if let EventBody::Candidate(c) = &mut e.body {
                c.val_score = c.val_score.map(|s| s * scale);
            }
        }
        let rescaled = replay(&scaled).unwrap();
        prop_assert_eq!(summary.incumbents, rescaled.incumbents);
        prop_assert_eq!(summary.global_best_id, rescaled.global_best_id);
    }
}
