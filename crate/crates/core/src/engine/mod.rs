//! The learner's step function.
//!
//! Every sample runs through inference, the energy update, history
//! bookkeeping, death and coverage handling, a parametric update, and
//! (while the structural phase is open) a one-step choice between noop,
//! genesis and wedge that minimises
//!
//! ```text
//! J(a) = loss(successor) + λ_c·ΔC + λ_e·cost(a)
//! ```
//!
//! subject to `cost(a) ≤ E`. The structure freezes once the step or move
//! cap is reached and every class is covered; parameters keep adapting.

mod config;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forms::{self, complexity, conj, conj_not, eval_soft, Form, GradMap, Registry};
use crate::hypotheses::{compress_hypotheses, HypId, Hypothesis, Memory};
use crate::manifold::{self, fisher_update, fit_separator, genesis_atom_init, ParamStore};
use crate::{ClassLabel, Error, Result};

pub use config::EngineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Noop,
    Genesis,
    Wedge,
    Death,
    CoverageGenesis,
}

impl Action {
    /// Genesis, wedge and coverage genesis change the hypothesis set.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            Action::Genesis | Action::Wedge | Action::CoverageGenesis
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Noop => "noop",
            Action::Genesis => "genesis",
            Action::Wedge => "wedge",
            Action::Death => "death",
            Action::CoverageGenesis => "coverage-genesis",
        }
    }
}

/// What one step reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: u64,
    pub prediction: ClassLabel,
    /// Softmax probability of `prediction`.
    pub confidence: f64,
    pub winner: Option<HypId>,
    /// Reward or penalty for the prediction.
    pub energy_delta: f64,
    pub action: Action,
    /// Energy spent on `action`.
    pub cost: f64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub prediction: ClassLabel,
    pub confidence: f64,
    /// Lowest tropical cost among hypotheses evaluating above 0.5.
    pub winner: Option<HypId>,
    pub logits: BTreeMap<ClassLabel, f64>,
    pub probabilities: BTreeMap<ClassLabel, f64>,
    /// Soft evaluation of each hypothesis, in hypothesis order.
    pub activations: Vec<f64>,
}

/// Class logits, softmax, and tropical winner for a hypothesis set.
///
/// The softmax runs over `classes` plus every hypothesis outcome; classes
/// without hypotheses get logit 0. With no hypotheses the prediction is the
/// smallest known class (or 0) at uniform confidence.
pub fn infer_with(
    hypotheses: &[Hypothesis],
    params: &ParamStore,
    registry: &Registry,
    classes: &BTreeSet<ClassLabel>,
    x: &[f64],
) -> Result<Inference> {
    let mut logits: BTreeMap<ClassLabel, f64> = classes.iter().map(|&k| (k, 0.0)).collect();
    let mut activations = Vec::with_capacity(hypotheses.len());
    let mut winner: Option<(f64, HypId)> = None;
    for h in hypotheses {
        let e = eval_soft(&h.form, x, params, registry)?;
        activations.push(e);
        *logits.entry(h.outcome).or_insert(0.0) += h.effective_weight() * e;
        if e > 0.5 {
            let cost = h.tropical_cost(registry)?;
            let better = match winner {
                None => true,
                Some((c, id)) => cost < c || (cost == c && h.id < id),
            };
            if better {
                winner = Some((cost, h.id));
            }
        }
    }
    if hypotheses.is_empty() {
        let prediction = classes.iter().next().copied().unwrap_or(0);
        let k = classes.len().max(1);
        let probabilities = if classes.is_empty() {
            BTreeMap::from([(0, 1.0)])
        } else {
            classes.iter().map(|&c| (c, 1.0 / k as f64)).collect()
        };
        return Ok(Inference {
            prediction,
            confidence: 1.0 / k as f64,
            winner: None,
            logits,
            probabilities,
            activations,
        });
    }
    let probabilities = softmax(&logits);
    let mut prediction = 0;
    let mut best = f64::NEG_INFINITY;
    for (&k, &p) in &probabilities {
        // strict comparison keeps the smallest label on ties
        if p > best {
            best = p;
            prediction = k;
        }
    }
    Ok(Inference {
        prediction,
        confidence: best,
        winner: winner.map(|(_, id)| id),
        logits,
        probabilities,
        activations,
    })
}

fn softmax(logits: &BTreeMap<ClassLabel, f64>) -> BTreeMap<ClassLabel, f64> {
    let max = logits.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: BTreeMap<ClassLabel, f64> =
        logits.iter().map(|(&k, &u)| (k, (u - max).exp())).collect();
    let total: f64 = exps.values().sum();
    exps.into_iter().map(|(k, e)| (k, e / total)).collect()
}

/// Cross-entropy of `y`, or `log(|classes| + 1)` when no hypothesis
/// predicts `y`.
pub fn loss_of(
    hypotheses: &[Hypothesis],
    params: &ParamStore,
    registry: &Registry,
    x: &[f64],
    y: ClassLabel,
    classes: &BTreeSet<ClassLabel>,
    floor: f64,
) -> Result<f64> {
    if !hypotheses.iter().any(|h| h.outcome == y) {
        return Ok(((classes.len() + 1) as f64).ln());
    }
    let inf = infer_with(hypotheses, params, registry, classes, x)?;
    Ok(-(inf.probabilities[&y] + floor).ln())
}

/// `loss + λ_c·ΔC + λ_e·cost`.
pub fn objective(loss: f64, complexity_delta: f64, cost: f64, cfg: &EngineConfig) -> f64 {
    loss + cfg.lambda_complexity * complexity_delta + cfg.lambda_energy * cost
}

pub fn total_complexity(hypotheses: &[Hypothesis], registry: &Registry) -> Result<f64> {
    hypotheses
        .iter()
        .map(|h| complexity(&h.form, registry))
        .sum()
}

/// Hypotheses together with the parameters their atoms reference.
#[derive(Clone, Debug, PartialEq)]
struct Structure {
    hypotheses: Vec<Hypothesis>,
    params: ParamStore,
    next_id: u64,
}

impl Structure {
    fn fresh_id(&mut self) -> HypId {
        let id = HypId(self.next_id);
        self.next_id += 1;
        id
    }

    fn genesis<R: Rng>(
        &mut self,
        rng: &mut R,
        x: &[f64],
        y: ClassLabel,
        history_index: usize,
        max_rules: usize,
    ) -> Result<Option<HypId>> {
        if self.hypotheses.len() >= max_rules {
            return Ok(None);
        }
        let (w, b) = genesis_atom_init(rng, x);
        let atom = self.params.alloc_atom(w, b)?;
        let weight = 1.0 + 0.05 * rng.random::<f64>();
        let id = self.fresh_id();
        self.hypotheses.push(Hypothesis::new(
            id,
            Form::Atom(atom),
            y,
            Memory::with_positive(history_index),
            weight,
        ));
        Ok(Some(id))
    }

    /// Split hypothesis at `pos` into `f ∧ A_k` (same outcome, new id) and
    /// the exception `f ∧ ¬A_k` with outcome `y`.
    #[allow(clippy::too_many_arguments)]
    fn wedge<R: Rng>(
        &mut self,
        rng: &mut R,
        pos: usize,
        x: &[f64],
        y: ClassLabel,
        history: &[(Vec<f64>, ClassLabel)],
        history_index: usize,
        cfg: &EngineConfig,
    ) -> Result<Option<(HypId, HypId)>> {
        if self.hypotheses.len() >= cfg.max_rules {
            return Ok(None);
        }
        let target = &self.hypotheses[pos];
        let mut positives: Vec<&[f64]> = target
            .memory
            .positive
            .iter()
            .map(|&i| history[i].0.as_slice())
            .collect();
        let mut negatives: Vec<&[f64]> = target
            .memory
            .negative
            .iter()
            .map(|&i| history[i].0.as_slice())
            .collect();
        negatives.push(x);
        if positives.is_empty() {
            positives.push(x);
        }
        let (w, b) = fit_separator(&positives, &negatives, cfg.ridge);
        let atom = self.params.alloc_atom(w, b)?;

        let shrunk_id = self.fresh_id();
        let exception_id = self.fresh_id();
        let original = self.hypotheses[pos].form.clone();
        let shrunk = &mut self.hypotheses[pos];
        shrunk.id = shrunk_id;
        shrunk.form = conj(original.clone(), Form::Atom(atom));
        let weight = 1.0 + 0.05 * rng.random::<f64>();
        self.hypotheses.push(Hypothesis::new(
            exception_id,
            conj_not(original, Form::Atom(atom)),
            y,
            Memory::with_positive(history_index),
            weight,
        ));
        Ok(Some((shrunk_id, exception_id)))
    }
}

/// A scored structural option.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub action: Action,
    pub cost: f64,
    pub loss: f64,
    pub complexity_delta: f64,
    /// `loss + λ_c·ΔC + λ_e·cost`.
    pub objective: f64,
    successor: Option<Structure>,
}

/// A step paused after the parametric update, before action selection.
#[derive(Clone, Debug)]
pub struct PendingStep {
    x: Vec<f64>,
    y: ClassLabel,
    t: u64,
    inference: Inference,
    delta_e: f64,
    correct: bool,
    history_index: usize,
}

impl PendingStep {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn inference(&self) -> &Inference {
        &self.inference
    }
}

pub enum Stage {
    /// Death or coverage genesis ended the step early.
    Done(Observation),
    Pending(PendingStep),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Engine {
    config: EngineConfig,
    structure: Structure,
    registry: Registry,
    energy: f64,
    history: Vec<(Vec<f64>, ClassLabel)>,
    step_count: u64,
    n_struct: usize,
    frozen: bool,
    freeze_step: Option<u64>,
    last_structural_step: Option<u64>,
    classes_seen: BTreeSet<ClassLabel>,
    class_count: Option<usize>,
    rng: ChaCha8Rng,
}

impl Engine {
    pub fn new(dim: usize, config: EngineConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        Ok(Engine {
            structure: Structure {
                hypotheses: Vec::new(),
                params: ParamStore::new(dim),
                next_id: 0,
            },
            registry: Registry::new(config.max_depth),
            energy: config.initial_energy,
            history: Vec::new(),
            step_count: 0,
            n_struct: 0,
            frozen: false,
            freeze_step: None,
            last_structural_step: None,
            classes_seen: BTreeSet::new(),
            class_count: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        })
    }

    /// Declare the label space `0..k`. Coverage then requires a hypothesis
    /// for every one of those classes before the structure may freeze.
    pub fn with_class_count(mut self, k: usize) -> Self {
        self.class_count = Some(k);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.structure.hypotheses
    }

    pub fn params(&self) -> &ParamStore {
        &self.structure.params
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn history(&self) -> &[(Vec<f64>, ClassLabel)] {
        &self.history
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn n_struct(&self) -> usize {
        self.n_struct
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Step index at which the structure froze.
    pub fn freeze_step(&self) -> Option<u64> {
        self.freeze_step
    }

    pub fn classes_seen(&self) -> &BTreeSet<ClassLabel> {
        &self.classes_seen
    }

    pub fn dim(&self) -> usize {
        self.structure.params.dim()
    }

    pub fn total_complexity(&self) -> Result<f64> {
        total_complexity(&self.structure.hypotheses, &self.registry)
    }

    /// Inference without touching any state.
    pub fn infer(&self, x: &[f64]) -> Result<Inference> {
        self.check_dim(x)?;
        infer_with(
            &self.structure.hypotheses,
            &self.structure.params,
            &self.registry,
            &self.classes_seen,
            x,
        )
    }

    /// Every seen (or declared) class has a hypothesis predicting it.
    pub fn coverage_complete(&self) -> bool {
        let covered: BTreeSet<ClassLabel> = self
            .structure
            .hypotheses
            .iter()
            .map(|h| h.outcome)
            .collect();
        let seen_ok = self.classes_seen.is_subset(&covered);
        match self.class_count {
            Some(k) => seen_ok && (0..k).all(|c| covered.contains(&c)),
            None => seen_ok,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn step(&mut self, x: &[f64], y: ClassLabel) -> Result<Observation> {
        match self.prepare(x, y)? {
            Stage::Done(obs) => Ok(obs),
            Stage::Pending(p) => self.finish(p),
        }
    }

    /// Inference, reward, history, death and coverage handling, and the
    /// parametric update.
    pub fn prepare(&mut self, x: &[f64], y: ClassLabel) -> Result<Stage> {
        self.check_dim(x)?;
        let t = self.step_count;
        self.step_count += 1;

        let inference = self.infer(x)?;
        let correct = !self.structure.hypotheses.is_empty() && inference.prediction == y;
        let delta_e = if correct {
            self.config.reward_correct
        } else {
            self.config.reward_wrong
        };
        self.energy = self.config.energy_decay * self.energy + delta_e;

        self.history.push((x.to_vec(), y));
        self.classes_seen.insert(y);
        let history_index = self.history.len() - 1;

        let observe = |action: Action, cost: f64| Observation {
            t,
            prediction: inference.prediction,
            confidence: inference.confidence,
            winner: inference.winner,
            energy_delta: delta_e,
            action,
            cost,
            correct,
        };

        if self.energy <= 0.0 {
            self.structure.hypotheses.clear();
            self.energy = 0.0;
            return Ok(Stage::Done(observe(Action::Death, 0.0)));
        }

        if !self.frozen && !self.structure.hypotheses.iter().any(|h| h.outcome == y) {
            let created = self.structure.genesis(
                &mut self.rng,
                x,
                y,
                history_index,
                self.config.max_rules,
            )?;
            if created.is_some() {
                let cost = self.config.genesis_cost;
                self.energy -= cost;
                self.n_struct += 1;
                self.last_structural_step = Some(t);
                return Ok(Stage::Done(observe(Action::CoverageGenesis, cost)));
            }
        }

        if let Some(winner) = inference.winner {
            self.parametric_update(x, y, &inference)?;
            let rate = self.config.reliability_rate;
            if let Some(h) = self
                .structure
                .hypotheses
                .iter_mut()
                .find(|h| h.id == winner)
            {
                let right = h.outcome == y;
                h.update_reliability(right, rate);
                h.record_memory(history_index, right);
            }
        }

        Ok(Stage::Pending(PendingStep {
            x: x.to_vec(),
            y,
            t,
            inference,
            delta_e,
            correct,
            history_index,
        }))
    }

    /// Action selection and the freeze check.
    pub fn finish(&mut self, pending: PendingStep) -> Result<Observation> {
        let mut action = Action::Noop;
        let mut cost = 0.0;
        if self.structural_phase_open(pending.t) {
            let mut rng = self.rng.clone();
            let candidates = self.candidates(&pending, &mut rng)?;
            self.rng = rng;
            let chosen = select(candidates);
            if chosen.action != Action::Noop {
                if let Some(successor) = chosen.successor {
                    self.structure = successor;
                }
                self.energy -= chosen.cost;
                self.n_struct += 1;
                self.last_structural_step = Some(pending.t);
                action = chosen.action;
                cost = chosen.cost;
            }
        }

        if !self.frozen
            && (pending.t >= self.config.t_max || self.n_struct >= self.config.n_max)
            && self.coverage_complete()
        {
            compress_hypotheses(&mut self.structure.hypotheses, &mut self.registry)?;
            self.frozen = true;
            self.freeze_step = Some(pending.t);
        }

        Ok(Observation {
            t: pending.t,
            prediction: pending.inference.prediction,
            confidence: pending.inference.confidence,
            winner: pending.inference.winner,
            energy_delta: pending.delta_e,
            action,
            cost,
            correct: pending.correct,
        })
    }

    fn structural_phase_open(&self, t: u64) -> bool {
        !self.frozen
            && t < self.config.t_max
            && self.n_struct < self.config.n_max
            && self
                .last_structural_step
                .is_none_or(|last| t - last >= self.config.cooldown)
    }

    /// True when noop scores no worse than every affordable structural
    /// candidate for this step. Vacuously true outside the structural
    /// phase. Consumes no randomness.
    pub fn check_freeze_condition(&self, pending: &PendingStep) -> Result<bool> {
        if !self.structural_phase_open(pending.t) {
            return Ok(true);
        }
        let mut rng = self.rng.clone();
        let candidates = self.candidates(pending, &mut rng)?;
        let noop = candidates[0].objective;
        Ok(candidates.iter().all(|c| noop <= c.objective))
    }

    /// Scored candidates for `pending`, noop first, filtered to those the
    /// current energy can pay for.
    pub fn structural_candidates(&self, pending: &PendingStep) -> Result<Vec<Candidate>> {
        let mut rng = self.rng.clone();
        self.candidates(pending, &mut rng)
    }

    fn candidates(&self, pending: &PendingStep, rng: &mut ChaCha8Rng) -> Result<Vec<Candidate>> {
        let cfg = &self.config;
        let (x, y) = (pending.x.as_slice(), pending.y);
        let hyps = &self.structure.hypotheses;
        let current_c = total_complexity(hyps, &self.registry)?;
        let score = |action: Action, cost: f64, s: Option<Structure>| -> Result<Candidate> {
            let (h, p) = match &s {
                Some(s) => (&s.hypotheses, &s.params),
                None => (hyps, &self.structure.params),
            };
            let loss = loss_of(
                h,
                p,
                &self.registry,
                x,
                y,
                &self.classes_seen,
                cfg.loss_floor,
            )?;
            let complexity_delta = total_complexity(h, &self.registry)? - current_c;
            Ok(Candidate {
                action,
                cost,
                loss,
                complexity_delta,
                objective: objective(loss, complexity_delta, cost, cfg),
                successor: s,
            })
        };

        let mut out = vec![score(Action::Noop, 0.0, None)?];
        match pending.inference.winner {
            None => {
                let mut s = self.structure.clone();
                if s.genesis(rng, x, y, pending.history_index, cfg.max_rules)?
                    .is_some()
                {
                    out.push(score(Action::Genesis, cfg.genesis_cost, Some(s))?);
                }
            }
            Some(w) => {
                let pos = hyps.iter().position(|h| h.id == w).expect("winner is live");
                let h = &hyps[pos];
                if h.outcome != y
                    && h.memory.positive.len() >= cfg.min_positive
                    && h.memory.negative.len() >= cfg.min_negative
                {
                    let mut s = self.structure.clone();
                    if s.wedge(rng, pos, x, y, &self.history, pending.history_index, cfg)?
                        .is_some()
                    {
                        out.push(score(Action::Wedge, cfg.wedge_cost, Some(s))?);
                    }
                }
            }
        }
        out.retain(|c| c.cost <= self.energy);
        Ok(out)
    }

    /// Gradient of the cross-entropy through softmax, effective weights and
    /// every hypothesis form, followed by the Fisher update and a step.
    fn parametric_update(&mut self, x: &[f64], y: ClassLabel, inference: &Inference) -> Result<()> {
        let mut grads = GradMap::new();
        for h in &self.structure.hypotheses {
            let p = inference
                .probabilities
                .get(&h.outcome)
                .copied()
                .unwrap_or(0.0);
            let indicator = if h.outcome == y { 1.0 } else { 0.0 };
            let coeff = (p - indicator) * h.effective_weight();
            forms::backprop(
                &h.form,
                x,
                &self.structure.params,
                &self.registry,
                0,
                coeff,
                &mut grads,
            )?;
        }
        let params = &mut self.structure.params;
        fisher_update(params, &grads, self.config.natgrad.fisher_decay)?;
        if self.config.natural_gradient {
            manifold::natural_step(params, &grads, &self.config.natgrad)
        } else {
            manifold::plain_step(params, &grads, self.config.natgrad.learning_rate)
        }
    }

    /// Genesis on the live state, paying its cost. `None` when the rule cap
    /// is reached.
    pub fn apply_genesis(&mut self, x: &[f64], y: ClassLabel) -> Result<Option<HypId>> {
        self.check_dim(x)?;
        let index = self.history.len().saturating_sub(1);
        let id = self
            .structure
            .genesis(&mut self.rng, x, y, index, self.config.max_rules)?;
        if id.is_some() {
            self.energy -= self.config.genesis_cost;
        }
        Ok(id)
    }

    /// Wedge on the live state, paying its cost. `None` when any
    /// precondition fails.
    pub fn apply_wedge(
        &mut self,
        winner: HypId,
        x: &[f64],
        y: ClassLabel,
    ) -> Result<Option<(HypId, HypId)>> {
        self.check_dim(x)?;
        let cfg = &self.config;
        let Some(pos) = self
            .structure
            .hypotheses
            .iter()
            .position(|h| h.id == winner)
        else {
            return Ok(None);
        };
        let h = &self.structure.hypotheses[pos];
        if h.outcome == y
            || h.memory.positive.len() < cfg.min_positive
            || h.memory.negative.len() < cfg.min_negative
            || self.energy < cfg.wedge_cost
        {
            return Ok(None);
        }
        let index = self.history.len().saturating_sub(1);
        let ids = self
            .structure
            .wedge(&mut self.rng, pos, x, y, &self.history, index, cfg)?;
        if ids.is_some() {
            self.energy -= self.config.wedge_cost;
        }
        Ok(ids)
    }
}

/// Lowest objective wins; earlier candidates (noop, then genesis) win ties.
fn select(candidates: Vec<Candidate>) -> Candidate {
    let mut iter = candidates.into_iter();
    let mut best = iter.next().expect("noop is always affordable");
    for c in iter {
        if c.objective < best.objective {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests;
