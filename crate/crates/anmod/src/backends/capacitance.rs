//! Surrogate physics for capacitance-simulation workflows: a coupling
//! capacitance between coplanar structures, and the T1 limit of a transmon
//! decaying into a nearby charge line.
//!
//! The coupling capacitance follows an inverse square root of the gap with a
//! small linear correction, so a user model `1/sqrt(d_gap)` is good but not
//! exact. The T1 limit follows the single-mode decay of a shunted mode into a
//! matched line, `T1 = C_sigma / (omega^2 * C_c^2 * Z_0)`, with the coupling
//! capacitance inversely proportional to tip distance — truth exponent 2 in
//! `d_tip`, against the customary cubic user model.
//!
//! Units: fF, µm, GHz, Ω; T1 reported in µs.

use std::sync::OnceLock;

use serde::Deserialize;

use super::{positive, Evaluator, EvaluatorError};
use crate::backends::noise::NoiseModel;
use crate::problem::{DesignPoint, ParameterVector};

#[derive(Debug, Clone, Deserialize)]
pub struct CouplingCapacitance {
    /// C(d_gap) = c0 / sqrt(d_gap) * (1 + eps * d_gap / d0).
    pub c0: f64,
    pub eps: f64,
    pub d0: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct T1Limit {
    /// Total shunt capacitance, fF.
    pub c_sigma: f64,
    /// Charge-line coupling at d_ref: C_c(d_tip) = c_tip * (d_tip / d_ref)^-1.
    pub c_tip: f64,
    pub d_ref: f64,
    /// Mode frequency, GHz.
    pub f_mode: f64,
    /// Line impedance, Ω.
    pub z0: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CapacitanceConstants {
    pub coupling_capacitance: CouplingCapacitance,
    pub t1_limit: T1Limit,
    pub noise: NoiseModel,
}

static CONSTANTS: OnceLock<CapacitanceConstants> = OnceLock::new();

/// Calibrated constants baked into the binary.
pub fn constants() -> &'static CapacitanceConstants {
    CONSTANTS.get_or_init(|| {
        toml::from_str(include_str!("../../data/capacitance.toml"))
            .expect("embedded capacitance.toml must parse")
    })
}

/// Which capacitance-derived quantity the evaluator reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacitanceMode {
    /// `C_coupling` as a function of `d_gap`.
    Coupling,
    /// `T1_limit` as a function of `d_tip`.
    T1,
}

/// Evaluator for capacitance-based targets.
#[derive(Debug, Clone)]
pub struct CapacitanceSurrogate {
    constants: CapacitanceConstants,
    mode: CapacitanceMode,
    cross_terms: bool,
    noise: bool,
}

impl CapacitanceSurrogate {
    pub fn new(mode: CapacitanceMode, cross_terms: bool, noise: bool) -> Self {
        Self {
            constants: constants().clone(),
            mode,
            cross_terms,
            noise,
        }
    }

    pub fn with_constants(
        constants: CapacitanceConstants,
        mode: CapacitanceMode,
        cross_terms: bool,
        noise: bool,
    ) -> Self {
        Self {
            constants,
            mode,
            cross_terms,
            noise,
        }
    }

    fn truth(&self, x: &DesignPoint) -> Result<ParameterVector, EvaluatorError> {
        match self.mode {
            CapacitanceMode::Coupling => {
                let k = &self.constants.coupling_capacitance;
                let d = positive(x, "d_gap")?;
                let correction = if self.cross_terms {
                    1.0 + k.eps * d / k.d0
                } else {
                    1.0
                };
                let c = k.c0 / d.sqrt() * correction;
                Ok(ParameterVector::from([("C_coupling".to_string(), c)]))
            }
            CapacitanceMode::T1 => {
                let k = &self.constants.t1_limit;
                let d = positive(x, "d_tip")?;
                let c_c = k.c_tip * k.d_ref / d;
                // All in SI, then report µs.
                let omega = 2.0 * std::f64::consts::PI * k.f_mode * 1e9;
                let t1_seconds =
                    (k.c_sigma * 1e-15) / (omega * omega * (c_c * 1e-15).powi(2) * k.z0);
                Ok(ParameterVector::from([(
                    "T1_limit".to_string(),
                    t1_seconds * 1e6,
                )]))
            }
        }
    }
}

impl Evaluator for CapacitanceSurrogate {
    fn parameter_names(&self) -> Vec<String> {
        match self.mode {
            CapacitanceMode::Coupling => vec!["C_coupling".to_string()],
            CapacitanceMode::T1 => vec!["T1_limit".to_string()],
        }
    }

    fn evaluate(
        &self,
        x: &DesignPoint,
        fidelity: u32,
        rng_seed: u64,
    ) -> Result<ParameterVector, EvaluatorError> {
        let mut values = self.truth(x)?;
        if self.noise {
            self.constants
                .noise
                .apply(&mut values, &self.parameter_names(), fidelity, rng_seed);
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gap(d: f64) -> DesignPoint {
        DesignPoint::from([("d_gap".into(), d)])
    }

    fn tip(d: f64) -> DesignPoint {
        DesignPoint::from([("d_tip".into(), d)])
    }

    #[test]
    fn capacitance_is_positive_and_strictly_decreasing_on_domain() {
        let surrogate = CapacitanceSurrogate::new(CapacitanceMode::Coupling, true, false);
        let mut last = f64::INFINITY;
        for step in 0..=96 {
            let d = 4.0 + step as f64;
            let c = surrogate.evaluate(&gap(d), 10, 0).unwrap()["C_coupling"];
            assert!(c > 0.0 && c < last, "C({d}) = {c} not below {last}");
            last = c;
        }
    }

    #[test]
    fn doubling_the_gap_scales_by_inverse_sqrt_without_correction() {
        let surrogate = CapacitanceSurrogate::new(CapacitanceMode::Coupling, false, false);
        let c1 = surrogate.evaluate(&gap(20.0), 10, 0).unwrap()["C_coupling"];
        let c2 = surrogate.evaluate(&gap(40.0), 10, 0).unwrap()["C_coupling"];
        assert!((c2 - c1 / 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn t1_is_positive_and_increasing_in_tip_distance() {
        let surrogate = CapacitanceSurrogate::new(CapacitanceMode::T1, true, false);
        let mut last = 0.0;
        for step in 1..=15 {
            let d = 10.0 * step as f64;
            let t1 = surrogate.evaluate(&tip(d), 10, 0).unwrap()["T1_limit"];
            assert!(t1 > last, "T1({d}) = {t1} not above {last}");
            last = t1;
        }
    }

    #[test]
    fn t1_truth_is_quadratic_in_tip_distance() {
        let surrogate = CapacitanceSurrogate::new(CapacitanceMode::T1, true, false);
        let t1 = surrogate.evaluate(&tip(30.0), 10, 0).unwrap()["T1_limit"];
        let t2 = surrogate.evaluate(&tip(60.0), 10, 0).unwrap()["T1_limit"];
        assert!((t2 - 4.0 * t1).abs() / t2 < 1e-12);
    }

    #[test]
    fn nonpositive_distance_is_out_of_domain() {
        let surrogate = CapacitanceSurrogate::new(CapacitanceMode::Coupling, true, false);
        let err = surrogate.evaluate(&gap(0.0), 10, 0).unwrap_err();
        assert!(matches!(err, EvaluatorError::OutOfDomain(_)), "{err}");
    }
}
