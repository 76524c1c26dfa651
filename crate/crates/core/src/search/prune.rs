use crate::types::PrePruneRule;

const EPS: f64 = 1e-9;

/// Whether a search should stop given the incumbent validation score after
/// each iteration (`history[0]` is the root prompt).
///
/// The running best only moves on a gain of at least `min_delta`. The run
/// stops once `patience` consecutive later entries fail to move it, so a
/// patience of 0 stops unconditionally.
pub fn pre_prune_check(history: &[f64], rule: &PrePruneRule) -> bool {
    let Some((&first, rest)) = history.split_first() else {
        return false;
    };
    let mut best = first;
    let mut stale = 0u32;
    for &score in rest {
        if score - best >= rule.min_delta - EPS {
            best = score;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    stale >= rule.patience
}
