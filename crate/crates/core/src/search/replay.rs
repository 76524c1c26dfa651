//! Re-derives every selection of a logged run from its candidate scores.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{argmax_first, Event, EventBody, EventKind, Strategy, StrategyParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("no events")]
    NoEvents,
    #[error("event {index}: expected {expected}, found {found:?}")]
    Grammar {
        index: usize,
        expected: &'static str,
        found: EventKind,
    },
    #[error("event {index}: {field} is `{logged}` but replay gives `{replayed}`")]
    Mismatch {
        index: usize,
        field: &'static str,
        logged: String,
        replayed: String,
    },
}

impl ReplayError {
    /// Index of the first divergent event, if any.
    pub fn index(&self) -> Option<usize> {
        match self {
            ReplayError::NoEvents => None,
            ReplayError::Grammar { index, .. } | ReplayError::Mismatch { index, .. } => Some(*index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub strategy: Strategy,
    /// Incumbent after every selection, in order.
    pub incumbents: Vec<String>,
    pub global_best_id: String,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Root,
    Open,
    Evaluated,
    Sampled,
    Analyzed,
    Patterned,
    Candidates,
    BlockDone,
    Done,
}

fn mismatch(index: usize, field: &'static str, logged: &str, replayed: &str) -> ReplayError {
    ReplayError::Mismatch {
        index,
        field,
        logged: logged.to_string(),
        replayed: replayed.to_string(),
    }
}

fn check(index: usize, field: &'static str, logged: &str, replayed: &str) -> Result<(), ReplayError> {
    if logged == replayed {
        Ok(())
    } else {
        Err(mismatch(index, field, logged, replayed))
    }
}

struct Replayer {
    params: StrategyParams,
    state: State,
    iteration: u32,
    batch: Vec<(String, f64)>,
    beam: Vec<(String, f64)>,
    best: Option<(String, f64)>,
    incumbent: String,
    incumbents: Vec<String>,
    completed: usize,
}

impl Replayer {
    fn step(&mut self, index: usize, event: &Event) -> Result<(), ReplayError> {
        let kind = event.body.kind();
        let grammar = |expected| ReplayError::Grammar { index, expected, found: kind };
        use State::*;
        match (&event.body, self.state) {
            (_, Done) => return Err(grammar("end of log")),
            (EventBody::RunFinished { incumbent_id, global_best_id, ledger, .. }, _) => {
                check(index, "incumbent_id", incumbent_id, &self.incumbent)?;
                let best = self.best.as_ref().map(|b| b.0.as_str()).unwrap_or_default();
                check(index, "global_best_id", global_best_id, best)?;
                let summed: usize = ledger.per_iteration.iter().map(|b| b.candidates).sum();
                check(
                    index,
                    "candidates_generated",
                    &ledger.candidates_generated.to_string(),
                    &summed.to_string(),
                )?;
                check(
                    index,
                    "candidates_generated",
                    &ledger.candidates_generated.to_string(),
                    &self.completed.to_string(),
                )?;
                self.state = Done;
            }
            (EventBody::Candidate(c), Root) => {
                let score = c.val_score.unwrap_or_default();
                self.best = Some((c.id.clone(), score));
                self.beam.push((c.id.clone(), score));
                self.incumbent = c.id.clone();
                self.state = Open;
            }
            (_, Root) => return Err(grammar("root candidate")),
            (EventBody::Evaluation { .. }, Open) => {
                if event.iteration != self.iteration + 1 {
                    return Err(mismatch(
                        index,
                        "iteration",
                        &event.iteration.to_string(),
                        &(self.iteration + 1).to_string(),
                    ));
                }
                self.iteration += 1;
                self.state = Evaluated;
            }
            (EventBody::Evaluation { .. }, Candidates | BlockDone) => {
                self.same_iteration(index, event)?;
                self.state = Evaluated;
            }
            (EventBody::FailureSample { failure_ids, .. }, Evaluated) => {
                self.same_iteration(index, event)?;
                self.state = if failure_ids.is_empty() { BlockDone } else { Sampled };
            }
            (EventBody::Analysis { .. }, Sampled) => {
                self.same_iteration(index, event)?;
                self.state = Analyzed;
            }
            (EventBody::Patterns { .. }, Analyzed) => {
                self.same_iteration(index, event)?;
                self.state = Patterned;
            }
            (EventBody::Candidate(c), Patterned | Candidates) => {
                self.same_iteration(index, event)?;
                let score = c.val_score.unwrap_or_default();
                if self.best.as_ref().is_none_or(|b| score > b.1) {
                    self.best = Some((c.id.clone(), score));
                }
                self.batch.push((c.id.clone(), score));
                self.state = Candidates;
            }
            (
                EventBody::Selection { incumbent_id, global_best_id, retained, .. },
                Candidates | BlockDone,
            ) if !self.batch.is_empty() => {
                self.same_iteration(index, event)?;
                let replayed = self.select();
                check(index, "incumbent_id", incumbent_id, &replayed[0])?;
                check(index, "retained", &retained.join(","), &replayed.join(","))?;
                let best = self.best.as_ref().map(|b| b.0.as_str()).unwrap_or_default();
                check(index, "global_best_id", global_best_id, best)?;
                self.incumbent = replayed[0].clone();
                self.incumbents.push(self.incumbent.clone());
                self.completed += self.batch.len();
                self.batch.clear();
                self.state = Open;
            }
            (_, Open) => return Err(grammar("evaluation")),
            (_, Evaluated) => return Err(grammar("failure_sample")),
            (_, Sampled) => return Err(grammar("analysis")),
            (_, Analyzed) => return Err(grammar("patterns")),
            (_, Patterned) => return Err(grammar("candidate")),
            (_, Candidates | BlockDone) => return Err(grammar("a block, selection or run_finished")),
        }
        Ok(())
    }

    fn same_iteration(&self, index: usize, event: &Event) -> Result<(), ReplayError> {
        check(
            index,
            "iteration",
            &event.iteration.to_string(),
            &self.iteration.to_string(),
        )
    }

    /// Ids retained by this iteration's selection; the first is the incumbent.
    fn select(&mut self) -> Vec<String> {
        match self.params {
            StrategyParams::ApoBeam { beam_width, .. } => {
                let mut pool = core::mem::take(&mut self.beam);
                pool.extend(self.batch.iter().cloned());
                pool.sort_by(|a, b| b.1.total_cmp(&a.1));
                pool.truncate(beam_width);
                self.beam = pool;
                self.beam.iter().map(|(id, _)| id.clone()).collect()
            }
            StrategyParams::Ampo | StrategyParams::MctsLite { .. } => {
                let scores: Vec<f64> = self.batch.iter().map(|b| b.1).collect();
                let i = argmax_first(&scores).expect("selection follows at least one candidate");
                alloc::vec![self.batch[i].0.clone()]
            }
        }
    }
}

/// Checks the event grammar and recomputes every incumbent, retained set
/// and global best from candidate scores alone. Fails at the first event
/// that disagrees.
pub fn replay(events: &[Event]) -> Result<ReplaySummary, ReplayError> {
    let first = events.first().ok_or(ReplayError::NoEvents)?;
    let EventBody::RunStarted { params, .. } = &first.body else {
        return Err(ReplayError::Grammar {
            index: 0,
            expected: "run_started",
            found: first.body.kind(),
        });
    };
    let mut replayer = Replayer {
        params: params.clone(),
        state: State::Root,
        iteration: 0,
        batch: Vec::new(),
        beam: Vec::new(),
        best: None,
        incumbent: String::new(),
        incumbents: Vec::new(),
        completed: 0,
    };
    for (index, event) in events.iter().enumerate().skip(1) {
        replayer.step(index, event)?;
    }
    Ok(ReplaySummary {
        strategy: replayer.params.strategy(),
        incumbents: replayer.incumbents,
        global_best_id: replayer.best.map(|b| b.0).unwrap_or_default(),
        finished: replayer.state == State::Done,
    })
}
