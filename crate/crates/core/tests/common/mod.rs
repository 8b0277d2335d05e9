//! Shared oracles for the integration tests.

use std::collections::BTreeSet;

use distinction_core::engine::{Action, Engine, Observation};
use distinction_core::forms::{eval_soft, render, Form};
use distinction_core::harness::Observer;
use distinction_core::hypotheses::HypId;
use distinction_core::{ClassLabel, Result};

pub type Snapshot = Vec<(HypId, Form, ClassLabel)>;

fn snapshot(engine: &Engine) -> Snapshot {
    engine
        .hypotheses()
        .iter()
        .map(|h| (h.id, h.form.clone(), h.outcome))
        .collect()
}

/// Checks the energy ledger, class coverage, the tropical winner and
/// post-freeze immutability after every step; panics on a violation.
#[derive(Default)]
pub struct Oracle {
    pub energy: f64,
    pub expected_winner: Option<HypId>,
    pub frozen: Option<(Snapshot, usize, Vec<String>)>,
    pub steps: usize,
    pub structural: Vec<Action>,
}

impl Observer for Oracle {
    fn before_step(&mut self, engine: &Engine, x: &[f64], _y: ClassLabel) -> Result<()> {
        self.energy = engine.energy();
        let mut best: Option<(f64, HypId)> = None;
        for h in engine.hypotheses() {
            if eval_soft(&h.form, x, engine.params(), engine.registry())? > 0.5 {
                let key = (h.tropical_cost(engine.registry())?, h.id);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        self.expected_winner = best.map(|b| b.1);
        Ok(())
    }

    fn after_step(&mut self, engine: &Engine, obs: &Observation) -> Result<()> {
        let cfg = engine.config();
        self.steps += 1;
        assert_eq!(obs.winner, self.expected_winner, "winner at t={}", obs.t);

        if obs.action == Action::Death {
            assert_eq!(engine.energy(), 0.0);
            assert!(engine.hypotheses().is_empty());
        } else {
            let replayed = cfg.energy_decay * self.energy + obs.energy_delta - obs.cost;
            assert_eq!(engine.energy(), replayed, "energy ledger at t={}", obs.t);
            let covered: BTreeSet<ClassLabel> =
                engine.hypotheses().iter().map(|h| h.outcome).collect();
            assert!(
                engine.classes_seen().is_subset(&covered),
                "coverage at t={}",
                obs.t
            );
        }
        let expected_delta = if obs.correct {
            cfg.reward_correct
        } else {
            cfg.reward_wrong
        };
        assert_eq!(obs.energy_delta, expected_delta);

        if obs.action.is_structural() {
            self.structural.push(obs.action);
        }
        match &self.frozen {
            Some((hyps, atoms, registry)) => {
                assert!(engine.is_frozen());
                assert_eq!(
                    obs.action,
                    Action::Noop,
                    "structural action after freeze at t={}",
                    obs.t
                );
                assert_eq!(&snapshot(engine), hyps);
                assert_eq!(engine.params().len(), *atoms);
                let reg: Vec<String> = engine.registry().iter().map(|(_, f)| render(f)).collect();
                assert_eq!(&reg, registry);
            }
            None if engine.is_frozen() => {
                let reg = engine.registry().iter().map(|(_, f)| render(f)).collect();
                self.frozen = Some((snapshot(engine), engine.params().len(), reg));
            }
            None => {}
        }
        Ok(())
    }
}
