//! Side-by-side summaries of finished runs.

use std::fmt::Write as _;
use std::path::Path;

use ampo_core::search::Strategy;
use ampo_core::{Event, EventBody};

use crate::error::{config, Result};
use crate::rundir::RunDir;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub strategy: Strategy,
    pub candidates: usize,
    pub best_val: f64,
    /// Best validation score so far: the root prompt, then after each
    /// completed iteration.
    pub trajectory: Vec<f64>,
}

pub fn summarize(events: &[Event], source: &str) -> Result<CompareRow> {
    let strategy = match events.first().map(|e| &e.body) {
        Some(EventBody::RunStarted { params, .. }) => params.strategy(),
        _ => return Err(config(format!("{source}: events.log does not start with run_started"))),
    };
    let mut trajectory = Vec::new();
    let mut finished = None;
    for event in events {
        match &event.body {
            EventBody::Candidate(c) if event.iteration == 0 && trajectory.is_empty() => {
                trajectory.push(c.val_score.unwrap_or_default());
            }
            EventBody::Selection { global_best_score, .. } => trajectory.push(*global_best_score),
            EventBody::RunFinished { ledger, .. } => finished = Some(ledger.candidates_generated),
            _ => {}
        }
    }
    let candidates = finished.ok_or_else(|| config(format!("{source}: run did not finish")))?;
    let best_val = trajectory.iter().copied().fold(0.0, f64::max);
    Ok(CompareRow { strategy, candidates, best_val, trajectory })
}

/// One row per run directory, fewest candidates first.
pub fn load_rows(dirs: &[impl AsRef<Path>]) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let dir = dir.as_ref();
        let events = RunDir::open(dir).read_events()?;
        rows.push(summarize(&events, &dir.display().to_string())?);
    }
    rows.sort_by_key(|r| r.candidates);
    Ok(rows)
}

fn trajectory(row: &CompareRow) -> String {
    row.trajectory.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>().join(";")
}

pub fn table(rows: &[CompareRow]) -> String {
    let mut out = format!("{:<10} {:>10} {:>8}  {}\n", "strategy", "candidates", "best_val", "trajectory");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>8.4}  {}",
            r.strategy.as_str(),
            r.candidates,
            r.best_val,
            trajectory(r)
        );
    }
    out
}

pub fn csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("strategy,candidates,best_val,trajectory\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.4},{}", r.strategy.as_str(), r.candidates, r.best_val, trajectory(r));
    }
    out
}
