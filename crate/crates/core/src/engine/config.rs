use serde::{Deserialize, Serialize};

use crate::forms::DEFAULT_MAX_DEPTH;
use crate::manifold::NatGradConfig;
use crate::{Error, Result};

/// Engine parameters. Defaults reproduce the reference configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub initial_energy: f64,
    /// Multiplicative energy retention per step (γ_E).
    pub energy_decay: f64,
    pub reward_correct: f64,
    pub reward_wrong: f64,
    pub genesis_cost: f64,
    pub wedge_cost: f64,
    /// λ_c: weight of the complexity change in the action objective.
    pub lambda_complexity: f64,
    /// λ_e: weight of the energy cost in the action objective.
    pub lambda_energy: f64,
    /// Structural actions are considered only while `t < t_max`.
    pub t_max: u64,
    /// Cap on structural moves.
    pub n_max: usize,
    /// Cap on live hypotheses.
    pub max_rules: usize,
    /// Minimum positive memories before a wedge.
    pub min_positive: usize,
    /// Minimum negative memories before a wedge.
    pub min_negative: usize,
    /// Steps that must separate two structural actions.
    pub cooldown: u64,
    pub natgrad: NatGradConfig,
    /// `false` replaces the preconditioned step with plain gradient descent.
    pub natural_gradient: bool,
    /// EMA rate ρ for hypothesis reliability.
    pub reliability_rate: f64,
    /// ε inside `−log(p_y + ε)`.
    pub loss_floor: f64,
    /// Ridge strength for wedge separators.
    pub ridge: f64,
    /// Recursion limit for registry references.
    pub max_depth: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            initial_energy: 10_000.0,
            energy_decay: 1.0,
            reward_correct: 10.0,
            reward_wrong: -10.0,
            genesis_cost: 5.0,
            wedge_cost: 8.0,
            lambda_complexity: 0.001,
            lambda_energy: 0.001,
            t_max: 500,
            n_max: 20,
            max_rules: 30,
            min_positive: 2,
            min_negative: 1,
            cooldown: 0,
            natgrad: NatGradConfig::default(),
            natural_gradient: true,
            reliability_rate: 0.1,
            loss_floor: 1e-12,
            ridge: 1.0,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| {
            Err(Error::Config {
                line: 0,
                message: message.to_string(),
            })
        };
        let finite = [
            self.initial_energy,
            self.energy_decay,
            self.reward_correct,
            self.reward_wrong,
            self.genesis_cost,
            self.wedge_cost,
            self.lambda_complexity,
            self.lambda_energy,
            self.natgrad.learning_rate,
            self.natgrad.fisher_decay,
            self.natgrad.epsilon,
            self.natgrad.fisher_exponent,
            self.reliability_rate,
            self.loss_floor,
            self.ridge,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.genesis_cost < 0.0 || self.wedge_cost < 0.0 {
            return bad("action costs must be non-negative");
        }
        if self.natgrad.learning_rate <= 0.0 {
            return bad("learning rate must be positive");
        }
        if !(self.natgrad.fisher_decay > 0.0 && self.natgrad.fisher_decay < 1.0) {
            return bad("fisher decay must lie in (0, 1)");
        }
        if self.natgrad.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if !(self.reliability_rate > 0.0 && self.reliability_rate <= 1.0) {
            return bad("reliability rate must lie in (0, 1]");
        }
        if self.ridge <= 0.0 {
            return bad("ridge strength must be positive");
        }
        Ok(())
    }
}
