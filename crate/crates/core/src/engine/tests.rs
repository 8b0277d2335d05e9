use approx::assert_abs_diff_eq;

use super::*;
use crate::forms::AtomId;

fn hyp(id: u64, form: Form, outcome: ClassLabel, reliability: f64, weight: f64) -> Hypothesis {
    let mut h = Hypothesis::new(HypId(id), form, outcome, Memory::default(), weight);
    h.reliability = reliability;
    h
}

fn classes(ks: &[ClassLabel]) -> BTreeSet<ClassLabel> {
    ks.iter().copied().collect()
}

#[test]
fn infer_single_marked_hypothesis() {
    let params = ParamStore::new(1);
    let reg = Registry::default();
    let hs = [hyp(0, Form::Mark, 1, 1.0, 1.0)];
    let inf = infer_with(&hs, &params, &reg, &classes(&[0, 1]), &[0.0]).unwrap();
    assert_eq!(inf.logits[&0], 0.0);
    assert_eq!(inf.logits[&1], 1.0);
    assert_eq!(inf.prediction, 1);
    assert_abs_diff_eq!(
        inf.confidence,
        1.0 / (1.0 + (-1.0f64).exp()),
        epsilon = 1e-15
    );
    assert_eq!(inf.winner, Some(HypId(0)));
}

#[test]
fn infer_without_firing_hypothesis_has_no_winner() {
    let mut params = ParamStore::new(1);
    params.alloc_atom(vec![1.0], -3.0).unwrap();
    let reg = Registry::default();
    let hs = [
        hyp(0, Form::atom(0), 0, 0.5, 1.0),
        hyp(1, Form::Void, 1, 0.5, 1.0),
    ];
    let inf = infer_with(&hs, &params, &reg, &classes(&[0, 1]), &[0.0]).unwrap();
    assert_eq!(inf.winner, None);
}

#[test]
fn infer_picks_cheapest_firing_hypothesis() {
    let params = ParamStore::new(1);
    let reg = Registry::default();
    // Mark has complexity 0: cost = 5(1 − r)
    let hs = [
        hyp(0, Form::Mark, 0, 0.2, 1.0), // 4.0
        hyp(1, Form::Mark, 1, 0.3, 1.0), // 3.5
        hyp(2, Form::Void, 1, 1.0, 1.0), // not firing
    ];
    let inf = infer_with(&hs, &params, &reg, &classes(&[0, 1]), &[0.0]).unwrap();
    let brute = hs
        .iter()
        .filter(|h| eval_soft(&h.form, &[0.0], &params, &reg).unwrap() > 0.5)
        .min_by(|a, b| {
            let ca = a.tropical_cost(&reg).unwrap();
            let cb = b.tropical_cost(&reg).unwrap();
            ca.partial_cmp(&cb).unwrap().then(a.id.cmp(&b.id))
        })
        .map(|h| h.id);
    assert_eq!(inf.winner, brute);
    assert_eq!(inf.winner, Some(HypId(1)));
}

#[test]
fn infer_ties_break_to_smallest_label_and_id() {
    let params = ParamStore::new(1);
    let reg = Registry::default();
    let hs = [
        hyp(4, Form::Mark, 2, 0.5, 1.0),
        hyp(3, Form::Mark, 1, 0.5, 1.0),
    ];
    let inf = infer_with(&hs, &params, &reg, &classes(&[1, 2]), &[0.0]).unwrap();
    assert_eq!(inf.prediction, 1);
    assert_eq!(inf.winner, Some(HypId(3)));
}

#[test]
fn infer_on_empty_set_is_uniform() {
    let params = ParamStore::new(1);
    let reg = Registry::default();
    let inf = infer_with(&[], &params, &reg, &classes(&[2, 5]), &[0.0]).unwrap();
    assert_eq!(inf.prediction, 2);
    assert_eq!(inf.confidence, 0.5);
    assert_eq!(inf.winner, None);
    let inf = infer_with(&[], &params, &reg, &classes(&[]), &[0.0]).unwrap();
    assert_eq!(inf.prediction, 0);
    assert_eq!(inf.confidence, 1.0);
}

#[test]
fn loss_examples() {
    let params = ParamStore::new(1);
    let reg = Registry::default();
    let sure = [hyp(0, Form::Mark, 0, 1.0, 1000.0)];
    let l = loss_of(&sure, &params, &reg, &[0.0], 0, &classes(&[0, 1, 2]), 1e-12).unwrap();
    assert!(l < 1e-9);

    let flat = [hyp(0, Form::Void, 1, 0.5, 1.0)];
    let l = loss_of(&flat, &params, &reg, &[0.0], 1, &classes(&[0, 1, 2]), 1e-12).unwrap();
    assert_abs_diff_eq!(l, 3f64.ln(), epsilon = 1e-10);

    let missing = [hyp(0, Form::Mark, 0, 0.5, 1.0)];
    let l = loss_of(
        &missing,
        &params,
        &reg,
        &[0.0],
        2,
        &classes(&[0, 1, 2]),
        1e-12,
    )
    .unwrap();
    assert_abs_diff_eq!(l, 4f64.ln(), epsilon = 1e-15);
}

#[test]
fn objective_arithmetic() {
    let cfg = EngineConfig::default();
    assert_eq!(objective(0.2, 0.0, 0.0, &cfg), 0.2);
    assert_abs_diff_eq!(objective(0.15, 1.0, 5.0, &cfg), 0.156, epsilon = 1e-15);
}

#[test]
fn first_sample_triggers_coverage_genesis() {
    let mut e = Engine::new(2, EngineConfig::default(), 0).unwrap();
    let obs = e.step(&[0.5, -1.0], 2).unwrap();
    assert_eq!(obs.action, Action::CoverageGenesis);
    assert!(!obs.correct);
    assert_eq!(obs.energy_delta, -10.0);
    assert_eq!(e.energy(), 9985.0);
    assert_eq!(e.hypotheses().len(), 1);
    assert_eq!(e.hypotheses()[0].outcome, 2);
    assert_eq!(e.total_complexity().unwrap(), 1.0);
    assert_eq!(e.n_struct(), 1);
    let a = e.params().activation(AtomId(0), &[0.5, -1.0]).unwrap();
    assert_abs_diff_eq!(a, 0.52497918747894, epsilon = 1e-10);
}

#[test]
fn apply_genesis_builds_hypothesis_and_pays() {
    let mut e = Engine::new(3, EngineConfig::default(), 11).unwrap();
    e.step(&[0.0, 0.0, 1.0], 0).unwrap();
    let before = e.energy();
    let x = [1.0, 2.0, -0.5];
    let id = e.apply_genesis(&x, 1).unwrap().unwrap();
    assert_eq!(e.energy(), before - 5.0);
    let h = e.hypotheses().iter().find(|h| h.id == id).unwrap();
    assert_eq!(h.outcome, 1);
    assert_eq!(h.reliability, 0.5);
    assert!((1.0..=1.05).contains(&h.weight));
    assert_eq!(complexity(&h.form, e.registry()).unwrap(), 1.0);
    let v = eval_soft(&h.form, &x, e.params(), e.registry()).unwrap();
    assert_abs_diff_eq!(v, 0.52497918747894, epsilon = 1e-10);
}

#[test]
fn apply_genesis_respects_rule_cap() {
    let cfg = EngineConfig {
        max_rules: 1,
        ..EngineConfig::default()
    };
    let mut e = Engine::new(1, cfg, 0).unwrap();
    e.step(&[0.0], 0).unwrap();
    let before = e.energy();
    assert_eq!(e.apply_genesis(&[1.0], 1).unwrap(), None);
    assert_eq!(e.energy(), before);
}

/// Engine with one hypothesis on class 0 whose memory already meets the
/// wedge thresholds.
fn wedge_ready_engine() -> Engine {
    let mut e = Engine::new(2, EngineConfig::default(), 5).unwrap();
    e.history = vec![
        (vec![1.0, 1.0], 0),
        (vec![1.5, 0.5], 0),
        (vec![-1.0, 0.5], 1),
    ];
    e.classes_seen = classes(&[0, 1]);
    let atom = e.structure.params.alloc_atom(vec![0.0, 1.0], 0.0).unwrap();
    let mut h = Hypothesis::new(HypId(0), Form::Atom(atom), 0, Memory::with_positive(0), 1.0);
    h.record_memory(1, true);
    h.record_memory(2, false);
    e.structure.hypotheses.push(h);
    e.structure.next_id = 1;
    e
}

#[test]
fn apply_wedge_replaces_and_adds() {
    let mut e = wedge_ready_engine();
    let before = e.energy();
    let x = [-1.0, 0.8];
    let (shrunk, exc) = e.apply_wedge(HypId(0), &x, 1).unwrap().unwrap();
    assert_eq!(e.hypotheses().len(), 2);
    assert_eq!(e.energy(), before - 8.0);
    let s = &e.hypotheses()[0];
    assert_eq!(s.id, shrunk);
    assert_eq!(s.outcome, 0);
    assert_eq!(s.memory.positive, [0, 1]);
    assert_eq!(s.form, conj(Form::atom(0), Form::atom(1)));
    let ex = &e.hypotheses()[1];
    assert_eq!(ex.id, exc);
    assert_eq!(ex.outcome, 1);
    assert_eq!(ex.reliability, 0.5);
    assert_eq!(ex.form, conj_not(Form::atom(0), Form::atom(1)));
}

#[test]
fn apply_wedge_checks_preconditions() {
    let mut e = wedge_ready_engine();
    // winner already predicts y
    assert_eq!(e.apply_wedge(HypId(0), &[0.0, 0.0], 0).unwrap(), None);
    e.structure.hypotheses[0].memory.negative.clear();
    assert_eq!(e.apply_wedge(HypId(0), &[0.0, 0.0], 1).unwrap(), None);
    let mut e = wedge_ready_engine();
    e.energy = 7.0;
    assert_eq!(e.apply_wedge(HypId(0), &[0.0, 0.0], 1).unwrap(), None);
}

#[test]
fn wedge_regions_partition_parent_under_sharp_limit() {
    let mut e = wedge_ready_engine();
    e.apply_wedge(HypId(0), &[-1.0, 0.8], 1).unwrap().unwrap();
    let mut params = e.params().clone();
    for (i, _) in e.params().iter() {
        for t in &mut params.atom_mut(i).unwrap().theta {
            *t *= 1000.0;
        }
    }
    let reg = e.registry();
    let parent = Form::atom(0);
    let (shrunk, exc) = (&e.hypotheses()[0].form, &e.hypotheses()[1].form);
    let mut checked = 0;
    for i in -20..=20 {
        for j in -20..=20 {
            let x = [i as f64 / 10.0 + 0.013, j as f64 / 10.0 + 0.017];
            // skip points within the soft band of either boundary
            let near = (0..2).any(|a| params.pre_activation(AtomId(a), &x).unwrap().abs() < 10.0);
            if near {
                continue;
            }
            let p = eval_soft(&parent, &x, &params, reg).unwrap();
            let s = eval_soft(shrunk, &x, &params, reg).unwrap();
            let q = eval_soft(exc, &x, &params, reg).unwrap();
            assert_abs_diff_eq!(s + q, p, epsilon = 1e-3);
            assert!(s.min(q) < 1e-3, "regions overlap at {x:?}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn frozen_correct_step_is_noop() {
    let cfg = EngineConfig {
        n_max: 1,
        ..EngineConfig::default()
    };
    let mut e = Engine::new(1, cfg, 0).unwrap();
    e.step(&[1.0], 0).unwrap();
    // second step closes the phase: n_struct = 1 ≥ n_max
    e.step(&[1.0], 0).unwrap();
    assert!(e.is_frozen());
    let before = e.hypotheses().to_vec();
    let energy = e.energy();
    let obs = e.step(&[1.0], 0).unwrap();
    assert!(obs.correct);
    assert_eq!(obs.action, Action::Noop);
    assert_eq!(obs.energy_delta, 10.0);
    assert_eq!(e.energy(), energy + 10.0);
    assert_eq!(e.hypotheses().len(), before.len());
    assert_eq!(e.hypotheses()[0].form, before[0].form);
}

#[test]
fn death_clears_hypotheses_and_stays_dead() {
    let cfg = EngineConfig {
        initial_energy: 16.0,
        ..EngineConfig::default()
    };
    let mut e = Engine::new(1, cfg, 0).unwrap();
    // 16 − 10 − 5 = 1
    assert_eq!(e.step(&[0.0], 0).unwrap().action, Action::CoverageGenesis);
    assert_eq!(e.energy(), 1.0);
    let obs = e.step(&[0.0], 1).unwrap();
    assert_eq!(obs.action, Action::Death);
    assert_eq!(e.energy(), 0.0);
    assert!(e.hypotheses().is_empty());
    assert_eq!(e.params().len(), 1, "atoms survive death");
    assert_eq!(e.step(&[0.0], 0).unwrap().action, Action::Death);
}

#[test]
fn freeze_condition_is_vacuous_outside_phase() {
    let cfg = EngineConfig {
        t_max: 0,
        ..EngineConfig::default()
    };
    let mut e = Engine::new(1, cfg, 0).unwrap();
    e.step(&[0.0], 0).unwrap();
    match e.prepare(&[0.0], 0).unwrap() {
        Stage::Pending(p) => assert!(e.check_freeze_condition(&p).unwrap()),
        Stage::Done(_) => panic!("expected a pending step"),
    }
}

#[test]
fn freeze_condition_agrees_with_selection() {
    let mut e = Engine::new(2, EngineConfig::default(), 9).unwrap();
    let xs = [
        [0.1, 2.0],
        [2.0, -1.0],
        [-2.0, -2.0],
        [1.5, 1.5],
        [-0.5, 0.3],
        [3.0, 0.0],
    ];
    for (i, x) in xs.iter().cycle().take(60).enumerate() {
        let y = i % 2;
        match e.prepare(x, y).unwrap() {
            Stage::Done(_) => {}
            Stage::Pending(p) => {
                let cands = e.structural_candidates(&p).unwrap();
                let dominant = e.check_freeze_condition(&p).unwrap();
                let open = e.structural_phase_open(p.t());
                let obs = e.finish(p).unwrap();
                if open {
                    assert_eq!(dominant, obs.action == Action::Noop, "step {i}: {cands:?}");
                }
            }
        }
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let mut e = Engine::new(2, EngineConfig::default(), 0).unwrap();
    assert!(matches!(
        e.step(&[1.0], 0),
        Err(Error::DimensionMismatch {
            expected: 2,
            got: 1
        })
    ));
    assert_eq!(e.step_count(), 0);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = EngineConfig {
        natgrad: manifold::NatGradConfig {
            fisher_decay: 1.0,
            ..Default::default()
        },
        ..EngineConfig::default()
    };
    assert!(Engine::new(1, cfg, 0).is_err());
}
