//! Structural rule learning under an energy budget.
//!
//! Hypotheses are logical forms over sigmoid halfspaces ([`forms`]), whose
//! parameters move by a diagonal-Fisher natural gradient ([`manifold`]).
//! The [`engine`] couples those fast parametric updates with slow
//! structural moves (genesis, wedge, noop) that are scored by a local
//! objective and paid for out of an endogenous energy reserve. The
//! [`harness`] streams benchmark datasets ([`data`]) through the engine
//! and records step-level trajectories.

pub mod data;
pub mod engine;
mod error;
pub mod forms;
pub mod harness;
pub mod hypotheses;
pub mod manifold;

pub use error::{Error, Result};

/// Dense 0-based class label.
pub type ClassLabel = usize;
