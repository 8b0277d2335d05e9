//! `key = value` engine configuration files.
//!
//! ```text
//! # energy
//! initial_energy = 10000
//! genesis_cost = 5
//! t_max = 500
//! natural_gradient = false
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys are case-insensitive;
//! a repeated key keeps its last value.

use std::path::Path;
use std::str::FromStr;

use crate::engine::EngineConfig;
use crate::{Error, Result};

/// Every accepted key, including aliases.
pub const KEYS: &[&str] = &[
    "initial_energy",
    "e0",
    "learning_rate",
    "eta",
    "fisher_decay",
    "beta",
    "lambda_c",
    "lambda_complexity",
    "lambda_e",
    "lambda_energy",
    "genesis_cost",
    "wedge_cost",
    "reward_correct",
    "reward_wrong",
    "energy_decay",
    "gamma_e",
    "t_max",
    "n_max",
    "max_rules",
    "min_positive",
    "min_negative",
    "cooldown",
    "natural_gradient",
    "fisher_exponent",
    "epsilon",
    "reliability_rate",
    "loss_floor",
    "ridge",
    "max_depth",
];

/// Parse a whole file on top of the defaults and validate the result.
pub fn parse_config(text: &str) -> Result<EngineConfig> {
    let mut cfg = EngineConfig::default();
    apply_config_text(text, &mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<EngineConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Apply each `key = value` line of `text` to `cfg`. Line numbers in
/// errors are 1-based.
pub fn apply_config_text(text: &str, cfg: &mut EngineConfig) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        set(cfg, &key.trim().to_ascii_lowercase(), value.trim())
            .map_err(|message| Error::Config { line, message })?;
    }
    Ok(())
}

fn set(cfg: &mut EngineConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "initial_energy" | "e0" => cfg.initial_energy = num(value)?,
        "learning_rate" | "eta" => cfg.natgrad.learning_rate = num(value)?,
        "fisher_decay" | "beta" => cfg.natgrad.fisher_decay = num(value)?,
        "lambda_c" | "lambda_complexity" => cfg.lambda_complexity = num(value)?,
        "lambda_e" | "lambda_energy" => cfg.lambda_energy = num(value)?,
        "genesis_cost" => cfg.genesis_cost = num(value)?,
        "wedge_cost" => cfg.wedge_cost = num(value)?,
        "reward_correct" => cfg.reward_correct = num(value)?,
        "reward_wrong" => cfg.reward_wrong = num(value)?,
        "energy_decay" | "gamma_e" => cfg.energy_decay = num(value)?,
        "t_max" => cfg.t_max = count(value)?,
        "n_max" => cfg.n_max = count(value)?,
        "max_rules" => cfg.max_rules = count(value)?,
        "min_positive" => cfg.min_positive = count(value)?,
        "min_negative" => cfg.min_negative = count(value)?,
        "cooldown" => cfg.cooldown = count(value)?,
        "natural_gradient" => cfg.natural_gradient = flag(value)?,
        "fisher_exponent" => cfg.natgrad.fisher_exponent = num(value)?,
        "epsilon" => cfg.natgrad.epsilon = num(value)?,
        "reliability_rate" => cfg.reliability_rate = num(value)?,
        "loss_floor" => cfg.loss_floor = num(value)?,
        "ridge" => cfg.ridge = num(value)?,
        "max_depth" => cfg.max_depth = count(value)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

fn num(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value
        .replace('_', "")
        .parse()
        .map_err(|_| format!("{value:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{value:?} is not finite"))
    }
}

/// Non-negative integer; `inf` and `max` mean no limit.
fn count<T: FromStr + Bounded>(value: &str) -> std::result::Result<T, String> {
    match value.to_ascii_lowercase().as_str() {
        "inf" | "max" | "none" => Ok(T::MAX),
        v => v
            .replace('_', "")
            .parse()
            .map_err(|_| format!("{value:?} is not a non-negative integer")),
    }
}

trait Bounded {
    const MAX: Self;
}

impl Bounded for u64 {
    const MAX: Self = u64::MAX;
}

impl Bounded for usize {
    const MAX: Self = usize::MAX;
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{value:?} is not a boolean")),
    }
}
