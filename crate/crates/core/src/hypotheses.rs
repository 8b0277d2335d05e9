//! Hypothesis records: a form bound to an outcome, with reliability and
//! a bounded memory of supporting and contradicting examples.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::forms::{self, complexity, Form, Registry};
use crate::{ClassLabel, Result};

/// Entries kept per polarity in [`Memory`].
pub const MEMORY_CAP: usize = 64;

/// Weight on `1 − r` in the tropical cost.
pub const RELIABILITY_PENALTY: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypId(pub u64);

impl fmt::Display for HypId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

/// History indices where the hypothesis fired and was right (`positive`)
/// or wrong (`negative`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Memory {
    pub positive: VecDeque<usize>,
    pub negative: VecDeque<usize>,
}

impl Memory {
    pub fn with_positive(idx: usize) -> Self {
        Memory {
            positive: VecDeque::from([idx]),
            negative: VecDeque::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub id: HypId,
    pub form: Form,
    pub outcome: ClassLabel,
    pub reliability: f64,
    pub memory: Memory,
    /// Output weight α; always positive.
    pub weight: f64,
}

impl Hypothesis {
    pub fn new(id: HypId, form: Form, outcome: ClassLabel, memory: Memory, weight: f64) -> Self {
        debug_assert!(weight > 0.0);
        Hypothesis {
            id,
            form,
            outcome,
            reliability: 0.5,
            memory,
            weight,
        }
    }

    /// `C(f) + 5(1 − r)`.
    pub fn tropical_cost(&self, registry: &Registry) -> Result<f64> {
        Ok(complexity(&self.form, registry)? + RELIABILITY_PENALTY * (1.0 - self.reliability))
    }

    pub fn update_reliability(&mut self, correct: bool, rate: f64) {
        let target = if correct { 1.0 } else { 0.0 };
        self.reliability = ((1.0 - rate) * self.reliability + rate * target).clamp(0.0, 1.0);
    }

    /// `α (0.5 + 0.5 r)`, in `[α/2, α]`.
    pub fn effective_weight(&self) -> f64 {
        self.weight * (0.5 + 0.5 * self.reliability)
    }

    pub fn record_memory(&mut self, idx: usize, positive: bool) {
        let slot = if positive {
            &mut self.memory.positive
        } else {
            &mut self.memory.negative
        };
        if slot.len() == MEMORY_CAP {
            slot.pop_front();
        }
        slot.push_back(idx);
    }
}

/// Compress the forms of `hypotheses` against `registry`; see
/// [`forms::compress`].
pub fn compress_hypotheses(hypotheses: &mut [Hypothesis], registry: &mut Registry) -> Result<()> {
    let forms: Vec<Form> = hypotheses.iter().map(|h| h.form.clone()).collect();
    let (forms, reg) = forms::compress(&forms, registry)?;
    for (h, f) in hypotheses.iter_mut().zip(forms) {
        h.form = f;
    }
    *registry = reg;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hyp(form: Form, reliability: f64, weight: f64) -> Hypothesis {
        let mut h = Hypothesis::new(HypId(0), form, 0, Memory::default(), weight);
        h.reliability = reliability;
        h
    }

    #[test]
    fn tropical_cost_examples() {
        let reg = Registry::default();
        // C = 3
        let f = Form::cross(Form::cross(Form::atom(0)));
        assert_abs_diff_eq!(
            hyp(f, 0.8, 1.0).tropical_cost(&reg).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        assert_eq!(
            hyp(Form::atom(0), 1.0, 1.0).tropical_cost(&reg).unwrap(),
            1.0
        );
        let fresh = Hypothesis::new(HypId(1), Form::atom(0), 2, Memory::with_positive(0), 1.0);
        assert_eq!(fresh.tropical_cost(&reg).unwrap(), 3.5);
    }

    #[test]
    fn tropical_cost_is_monotone_on_grid() {
        let reg = Registry::default();
        let forms = [
            Form::atom(0),
            Form::cross(Form::atom(0)),
            Form::cross(Form::cross(Form::atom(0))),
        ];
        for f in &forms {
            let costs: Vec<f64> = (0..=10)
                .map(|i| {
                    hyp(f.clone(), i as f64 / 10.0, 1.0)
                        .tropical_cost(&reg)
                        .unwrap()
                })
                .collect();
            assert!(costs.windows(2).all(|w| w[1] < w[0]));
        }
        for r in [0.0, 0.3, 1.0] {
            let costs: Vec<f64> = forms
                .iter()
                .map(|f| hyp(f.clone(), r, 1.0).tropical_cost(&reg).unwrap())
                .collect();
            assert!(costs.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn reliability_updates() {
        let mut h = hyp(Form::atom(0), 0.5, 1.0);
        h.update_reliability(true, 0.1);
        assert_abs_diff_eq!(h.reliability, 0.55, epsilon = 1e-15);
        let mut h = hyp(Form::atom(0), 0.5, 1.0);
        h.update_reliability(false, 0.1);
        assert_abs_diff_eq!(h.reliability, 0.45, epsilon = 1e-15);

        let mut h = hyp(Form::atom(0), 0.5, 1.0);
        for _ in 0..50 {
            h.update_reliability(true, 0.1);
        }
        // 1 − 0.5·0.9⁵⁰ ≈ 0.99742
        assert!(h.reliability >= 0.99);
        assert_abs_diff_eq!(h.reliability, 1.0 - 0.5 * 0.9f64.powi(50), epsilon = 1e-12);
    }

    #[test]
    fn reliability_stays_in_unit_interval() {
        let mut h = hyp(Form::atom(0), 0.0, 1.0);
        for i in 0..1000 {
            h.update_reliability(i % 7 != 0, 1.0);
            assert!((0.0..=1.0).contains(&h.reliability));
        }
    }

    #[test]
    fn effective_weight_examples() {
        assert_eq!(hyp(Form::atom(0), 1.0, 1.0).effective_weight(), 1.0);
        assert_eq!(hyp(Form::atom(0), 0.0, 1.0).effective_weight(), 0.5);
        assert_abs_diff_eq!(
            hyp(Form::atom(0), 0.5, 1.05).effective_weight(),
            0.7875,
            epsilon = 1e-15
        );
    }

    #[test]
    fn memory_records_and_caps() {
        let mut h = hyp(Form::atom(0), 0.5, 1.0);
        h.record_memory(5, true);
        assert_eq!(h.memory.positive, [5]);
        assert!(h.memory.negative.is_empty());
        for i in 0..MEMORY_CAP {
            h.record_memory(100 + i, false);
        }
        assert_eq!(h.memory.negative.len(), MEMORY_CAP);
        h.record_memory(999, false);
        assert_eq!(h.memory.negative.len(), MEMORY_CAP);
        assert_eq!(h.memory.negative.front(), Some(&101));
        assert_eq!(h.memory.negative.back(), Some(&999));
    }

    #[test]
    fn wedge_evidence_accumulates() {
        let mut h = Hypothesis::new(HypId(0), Form::atom(0), 1, Memory::with_positive(0), 1.0);
        let ready = |h: &Hypothesis| h.memory.positive.len() >= 2 && !h.memory.negative.is_empty();
        assert!(!ready(&h));
        h.record_memory(3, false);
        assert!(!ready(&h));
        h.record_memory(4, true);
        assert!(ready(&h));
    }
}
