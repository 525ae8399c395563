//! Evaluators: the expensive information-collection step of the loop.
//!
//! Real deployments run electromagnetic simulation here; this crate ships
//! closed-form surrogates that are deliberately richer than the user-declared
//! proportionality models (extra exponents, cross-terms, saturation), so the
//! optimizer is exercised against honest model error. Fidelity emulates
//! mesh-refinement pass counts: more passes, less extraction noise.

use crate::problem::{DesignPoint, ParameterVector};

pub mod capacitance;
pub mod noise;
pub mod perfect_model;
pub mod qubit_resonator;
pub mod two_qubit;

pub use capacitance::{CapacitanceMode, CapacitanceSurrogate};
pub use noise::NoiseModel;
pub use perfect_model::PerfectModelEvaluator;
pub use qubit_resonator::QubitResonatorSurrogate;
pub use two_qubit::TwoQubitSurrogate;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvaluatorError {
    /// Stand-in for misassigned simulation modes: the surrogate refuses
    /// design points where modes would swap identity.
    #[error("mode-order violation: {0}")]
    ModeOrder(String),
    #[error("design point missing variable `{0}`")]
    MissingVariable(String),
    #[error("design point outside supported domain: {0}")]
    OutOfDomain(String),
    #[error("evaluator failure: {0}")]
    Other(String),
}

/// A simulation stand-in. Implementations must be pure functions of
/// `(x, fidelity, rng_seed)` so runs can be replayed byte-for-byte.
pub trait Evaluator: Send + Sync {
    /// Names of every parameter an evaluation produces.
    fn parameter_names(&self) -> Vec<String>;

    /// Evaluates the design at the given fidelity (mesh passes). `rng_seed`
    /// feeds the extraction-noise model; noise-free evaluators ignore it.
    fn evaluate(
        &self,
        x: &DesignPoint,
        fidelity: u32,
        rng_seed: u64,
    ) -> Result<ParameterVector, EvaluatorError>;
}

pub(crate) fn require(x: &DesignPoint, name: &str) -> Result<f64, EvaluatorError> {
    x.get(name)
        .copied()
        .ok_or_else(|| EvaluatorError::MissingVariable(name.to_string()))
}

/// Fetches a design variable and insists it is a positive finite length,
/// inductance, or distance; every surrogate shares this domain rule.
pub(crate) fn positive(x: &DesignPoint, name: &str) -> Result<f64, EvaluatorError> {
    let value = require(x, name)?;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EvaluatorError::OutOfDomain(format!(
            "design variable {name} must be positive and finite, got {value}"
        )))
    }
}
