//! Phase diagnostics computed from a finished run's step log.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::hypotheses::HypId;

/// Structural moves in the trailing `window` steps (ending at `t`),
/// divided by `window`. Early steps count whatever prefix exists, still
/// over `window`. Panics if `window == 0`.
pub fn transition_rate(record: &RunRecord, window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let flags: Vec<usize> = record
        .steps
        .iter()
        .map(|s| usize::from(s.action.is_structural()))
        .collect();
    let mut out = Vec::with_capacity(flags.len());
    let mut in_window = 0;
    for (t, &f) in flags.iter().enumerate() {
        in_window += f;
        if t >= window {
            in_window -= flags[t - window];
        }
        out.push(in_window as f64 / window as f64);
    }
    out
}

/// Live hypothesis ids after every step, carried forward across steps
/// whose log omits them.
pub fn hypothesis_sets(record: &RunRecord) -> Vec<BTreeSet<HypId>> {
    let mut current = BTreeSet::new();
    record
        .steps
        .iter()
        .map(|s| {
            if let Some(ids) = &s.hyp_ids {
                current = ids.iter().copied().collect();
            }
            current.clone()
        })
        .collect()
}

/// `(t, S(t))` where `S(t)` is the share of ids alive at `t − lag` that are
/// still alive at `t`. Steps where `t < lag` or nothing was alive at
/// `t − lag` are omitted. Panics if `lag == 0`.
pub fn survival_rate(record: &RunRecord, lag: usize) -> Vec<(u64, f64)> {
    assert!(lag >= 1, "lag must be at least 1");
    let sets = hypothesis_sets(record);
    (lag..sets.len())
        .filter(|&t| !sets[t - lag].is_empty())
        .map(|t| {
            let before = &sets[t - lag];
            let kept = before.intersection(&sets[t]).count();
            (record.steps[t].t, kept as f64 / before.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: u64,
    pub complexity: f64,
    pub energy: f64,
    /// Share of correct predictions over the trailing window.
    pub running_accuracy: f64,
    pub n_hyp: usize,
}

/// Complexity, energy and trailing training accuracy at every step.
pub fn phase_trajectory(record: &RunRecord, window: usize) -> Vec<PhasePoint> {
    let window = window.max(1);
    let mut hits = 0usize;
    record
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            hits += usize::from(s.correct);
            if i >= window {
                hits -= usize::from(record.steps[i - window].correct);
            }
            PhasePoint {
                t: s.t,
                complexity: s.complexity,
                energy: s.energy,
                running_accuracy: hits as f64 / (i + 1).min(window) as f64,
                n_hyp: s.n_hyp,
            }
        })
        .collect()
}
