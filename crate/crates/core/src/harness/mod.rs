//! Experiment runner: regimes, seeded epochs, per-step logs, evaluation,
//! diagnostics, rule export and a logistic-regression reference.

mod baseline;
mod config_file;
mod diagnostics;
mod log;
mod rules;
mod suite;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, LabelColumn, Split};
use crate::engine::{Action, Engine, EngineConfig, Observation};
use crate::forms::{alias, render, RegistryKey};
use crate::hypotheses::HypId;
use crate::{ClassLabel, Error, Result};

pub use baseline::{logistic_baseline, LogisticModel};
pub use config_file::{apply_config_text, load_config_file, parse_config, KEYS as CONFIG_KEYS};
pub use diagnostics::{
    hypothesis_sets, phase_trajectory, survival_rate, transition_rate, PhasePoint,
};
pub use log::{read_run_log, write_run_log, LogLine};
pub use rules::export_rules;
pub use suite::{
    run_stem, suite, summarize, write_phase_csv, write_run_files, write_summary_csv, CellStats,
    SuiteConfig, SuiteRow,
};

/// Fraction of each class used for training.
pub const TRAIN_FRACTION: f64 = 0.7;

/// ChaCha stream for epoch shuffles, apart from the engine's own stream.
const ORDER_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// No step or move cap; energy and the objective still gate actions.
    A,
    /// Capped at `t_max` steps and `n_max` structural moves.
    B,
    /// No structural moves beyond coverage genesis.
    C,
}

impl Regime {
    /// Impose the regime's caps on `cfg`.
    pub fn apply(self, cfg: &mut EngineConfig) {
        match self {
            Regime::A => {
                cfg.t_max = u64::MAX;
                cfg.n_max = usize::MAX;
            }
            Regime::B => {}
            Regime::C => cfg.n_max = 0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Regime::A),
            "B" => Ok(Regime::B),
            "C" => Ok(Regime::C),
            _ => Err(Error::Config {
                line: 0,
                message: format!("unknown regime {s:?}; expected A, B or C"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Plain gradient steps instead of the Fisher-preconditioned ones.
    pub no_natural_gradient: bool,
    /// λ_c = 0.
    pub no_complexity: bool,
    /// λ_e = 0.
    pub no_energy_cost: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// A bundled dataset name or a CSV path (label in the last column).
    pub dataset: String,
    pub regime: Regime,
    pub seed: u64,
    pub epochs: usize,
    pub engine: EngineConfig,
    pub ablation: Ablation,
}

impl RunConfig {
    pub fn new(dataset: &str, regime: Regime, seed: u64) -> Self {
        RunConfig {
            dataset: dataset.to_string(),
            regime,
            seed,
            epochs: 20,
            engine: EngineConfig::default(),
            ablation: Ablation::default(),
        }
    }

    /// The engine configuration after regime caps and ablations.
    pub fn effective_engine_config(&self) -> EngineConfig {
        let mut cfg = self.engine.clone();
        self.regime.apply(&mut cfg);
        if self.ablation.no_natural_gradient {
            cfg.natural_gradient = false;
        }
        if self.ablation.no_complexity {
            cfg.lambda_complexity = 0.0;
        }
        if self.ablation.no_energy_cost {
            cfg.lambda_energy = 0.0;
        }
        cfg
    }
}

/// Resolve a bundled dataset name, or else read the CSV file at that path.
pub fn load_dataset(name: &str) -> Result<Dataset> {
    match data::bundled(name) {
        Err(Error::UnknownDataset(_)) if Path::new(name).is_file() => {
            data::load_csv(name, &LabelColumn::Last)
        }
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset: String,
    pub regime: Regime,
    pub seed: u64,
    pub epochs: usize,
    pub ablation: Ablation,
    pub engine: EngineConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub class_names: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: u64,
    pub epoch: usize,
    pub y: ClassLabel,
    pub prediction: ClassLabel,
    pub correct: bool,
    pub winner: Option<HypId>,
    pub action: Action,
    /// Energy after the step.
    #[serde(rename = "E")]
    pub energy: f64,
    pub energy_delta: f64,
    pub cost: f64,
    /// Total complexity after the step.
    #[serde(rename = "C")]
    pub complexity: f64,
    pub n_hyp: usize,
    pub n_struct: usize,
    pub frozen: bool,
    /// Live hypothesis ids after the step; present only when the set changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp_ids: Option<Vec<HypId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Engine step count at the end of the epoch.
    pub t: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub id: HypId,
    pub outcome: ClassLabel,
    pub label: String,
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    pub reliability: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub freeze_step: Option<u64>,
    pub n_struct: usize,
    pub energy: f64,
    pub complexity: f64,
    pub deaths: usize,
    pub rules: Vec<RuleRecord>,
    /// Shared subforms, as `(key, rendered form)`.
    pub registry: Vec<(RegistryKey, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
    pub summary: FinalSummary,
}

impl RunRecord {
    /// Number of structural moves taken, coverage genesis included.
    pub fn structural_actions(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.action.is_structural())
            .count()
    }
}

/// Hooks into [`run_observed`].
pub trait Observer {
    fn before_step(&mut self, _engine: &Engine, _x: &[f64], _y: ClassLabel) -> Result<()> {
        Ok(())
    }

    fn after_step(&mut self, _engine: &Engine, _obs: &Observation) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

pub fn run(config: &RunConfig) -> Result<RunRecord> {
    run_observed(config, &mut ())
}

/// Standardized stratified split for `config`.
pub fn prepare_split(config: &RunConfig) -> Result<Split> {
    let ds = load_dataset(&config.dataset)?;
    Ok(data::standardize(&data::stratified_split(
        &ds,
        TRAIN_FRACTION,
        config.seed,
    )?))
}

pub fn run_observed(config: &RunConfig, observer: &mut impl Observer) -> Result<RunRecord> {
    let split = prepare_split(config)?;
    run_on_split(config, &split, observer)
}

/// Stream `split.train` through a fresh engine for `config.epochs` epochs,
/// reshuffling each epoch with the run seed.
pub fn run_on_split(
    config: &RunConfig,
    split: &Split,
    observer: &mut impl Observer,
) -> Result<RunRecord> {
    let engine_cfg = config.effective_engine_config();
    let train = &split.train;
    let n_classes = train.n_classes();
    let mut engine =
        Engine::new(train.dim(), engine_cfg.clone(), config.seed)?.with_class_count(n_classes);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(ORDER_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut steps = Vec::with_capacity(config.epochs * train.len());
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut last_ids: Vec<HypId> = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        for &i in &order {
            let (x, y) = (&train.x[i], train.y[i]);
            observer.before_step(&engine, x, y)?;
            let obs = engine.step(x, y)?;
            observer.after_step(&engine, &obs)?;
            let ids: Vec<HypId> = engine.hypotheses().iter().map(|h| h.id).collect();
            let changed = steps.is_empty() || ids != last_ids;
            steps.push(StepLog {
                t: obs.t,
                epoch,
                y,
                prediction: obs.prediction,
                correct: obs.correct,
                winner: obs.winner,
                action: obs.action,
                energy: engine.energy(),
                energy_delta: obs.energy_delta,
                cost: obs.cost,
                complexity: engine.total_complexity()?,
                n_hyp: ids.len(),
                n_struct: engine.n_struct(),
                frozen: engine.is_frozen(),
                hyp_ids: changed.then(|| ids.clone()),
            });
            last_ids = ids;
        }
        epochs.push(EpochLog {
            epoch,
            t: engine.step_count(),
            train_accuracy: accuracy(&engine, train)?,
            test_accuracy: accuracy(&engine, &split.test)?,
        });
    }

    let mut notes = Vec::new();
    if config.regime == Regime::C {
        notes
            .push("regime C still creates one coverage hypothesis per uncovered class".to_string());
    }
    let meta = RunMeta {
        dataset: train.name.clone(),
        regime: config.regime,
        seed: config.seed,
        epochs: config.epochs,
        ablation: config.ablation,
        engine: engine_cfg,
        n_train: train.len(),
        n_test: split.test.len(),
        dim: train.dim(),
        class_names: train.class_names.clone(),
        notes,
    };
    let summary = FinalSummary {
        test_accuracy: epochs
            .last()
            .map_or(accuracy(&engine, &split.test)?, |e| e.test_accuracy),
        train_accuracy: epochs
            .last()
            .map_or(accuracy(&engine, train)?, |e| e.train_accuracy),
        freeze_step: engine.freeze_step(),
        n_struct: engine.n_struct(),
        energy: engine.energy(),
        complexity: engine.total_complexity()?,
        deaths: steps.iter().filter(|s| s.action == Action::Death).count(),
        rules: rule_records(&engine, &train.class_names)?,
        registry: engine
            .registry()
            .iter()
            .map(|(k, f)| (k, render(f)))
            .collect(),
    };
    Ok(RunRecord {
        meta,
        steps,
        epochs,
        summary,
    })
}

/// Fraction of `ds` the engine labels correctly. Inference only.
pub fn accuracy(engine: &Engine, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (x, &y) in ds.x.iter().zip(&ds.y) {
        if engine.infer(x)?.prediction == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Live hypotheses as exportable rules, ordered by id.
pub fn rule_records(engine: &Engine, class_names: &[String]) -> Result<Vec<RuleRecord>> {
    let registry = engine.registry();
    let mut rules = engine
        .hypotheses()
        .iter()
        .map(|h| {
            Ok(RuleRecord {
                id: h.id,
                outcome: h.outcome,
                label: class_names
                    .get(h.outcome)
                    .cloned()
                    .unwrap_or_else(|| h.outcome.to_string()),
                form: render(&h.form),
                alias: alias(&h.form),
                reliability: h.reliability,
                cost: h.tropical_cost(registry)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rules.sort_by_key(|r| r.id);
    Ok(rules)
}

/// Classes that have at least one rule at the end of the run.
pub fn covered_classes(record: &RunRecord) -> BTreeSet<ClassLabel> {
    record.summary.rules.iter().map(|r| r.outcome).collect()
}
