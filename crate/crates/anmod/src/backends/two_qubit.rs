//! Surrogate physics for a two-qubit processor: two transmons with readout
//! resonators, joined by a tunable coupler. Five modes, twelve parameters.
//!
//! Outputs: `f_res_1`, `f_res_2`, `f_qb_1`, `f_qb_2`, `f_c`, `alpha_1`,
//! `alpha_2`, `alpha_c`, `chi_1`, `chi_2`, `chi_c1`, `chi_c2`.
//!
//! The coupler-qubit couplings use the qubit-1 detuning pole `f_qb_1 - f_c`
//! for both qubits: qubit 2 and the coupler are designed onto the same
//! frequency, so their own detuning vanishes at the target point and cannot
//! anchor a dispersive estimate. Units: GHz, µm, nH.

use std::sync::OnceLock;

use serde::Deserialize;

use super::{positive, Evaluator, EvaluatorError};
use crate::backends::noise::NoiseModel;
use crate::problem::{DesignPoint, ParameterVector};

#[derive(Debug, Clone, Deserialize)]
pub struct Arm {
    /// f_res (bare) = v_res / l_res.
    pub v_res: f64,
    /// E_J = ej_scale / L_qb.
    pub ej_scale: f64,
    /// E_C = ec_w / w_qb.
    pub ec_w: f64,
    /// g = g_0 * w_ref * (w_res_qb / w_ref)^p_g / w_qb.
    pub g_0: f64,
    pub w_ref: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Coupler {
    /// E_J = ej_c / L_c.
    pub ej_c: f64,
    /// E_C = ec_w_c / w_c.
    pub ec_w_c: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CouplerQubit {
    /// chi_c_i = ac_i * w_c_qb_i^(-p_c) / (f_qb_1 - f_c).
    pub ac_1: f64,
    pub ac_2: f64,
    /// Separation exponent; 1 with cross-terms disabled.
    pub p_c: f64,
    /// Minimum allowed f_qb_1 - f_c before the dispersive estimate breaks.
    pub pole_margin: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CouplingShape {
    /// Claw exponent for both arms; 1 with cross-terms disabled.
    pub p_g: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GroupMargin {
    /// Required gap between the highest qubit-like and lowest resonator-like
    /// bare mode.
    pub margin: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TwoQubitConstants {
    pub arm1: Arm,
    pub arm2: Arm,
    pub coupler: Coupler,
    pub coupler_qubit: CouplerQubit,
    pub coupling_shape: CouplingShape,
    pub mode_order: GroupMargin,
    pub noise: NoiseModel,
}

static CONSTANTS: OnceLock<TwoQubitConstants> = OnceLock::new();

/// Calibrated constants baked into the binary.
pub fn constants() -> &'static TwoQubitConstants {
    CONSTANTS.get_or_init(|| {
        toml::from_str(include_str!("../../data/two_qubit.toml"))
            .expect("embedded two_qubit.toml must parse")
    })
}

struct ArmOutput {
    f_res: f64,
    f_qb: f64,
    f_qb_bare: f64,
    f_res_bare: f64,
    alpha: f64,
    chi: f64,
}

/// Evaluator for the two-qubit-with-coupler system.
#[derive(Debug, Clone)]
pub struct TwoQubitSurrogate {
    constants: TwoQubitConstants,
    cross_terms: bool,
    noise: bool,
}

impl TwoQubitSurrogate {
    pub fn new(cross_terms: bool, noise: bool) -> Self {
        Self {
            constants: constants().clone(),
            cross_terms,
            noise,
        }
    }

    pub fn with_constants(constants: TwoQubitConstants, cross_terms: bool, noise: bool) -> Self {
        Self {
            constants,
            cross_terms,
            noise,
        }
    }

    fn arm(&self, arm: &Arm, x: &DesignPoint, suffix: &str) -> Result<ArmOutput, EvaluatorError> {
        let l_res = positive(x, &format!("l_res_{suffix}"))?;
        let l_qb = positive(x, &format!("L_qb_{suffix}"))?;
        let w_qb = positive(x, &format!("w_qb_{suffix}"))?;
        let w_res_qb = positive(x, &format!("w_res_qb_{suffix}"))?;

        let e_j = arm.ej_scale / l_qb;
        let e_c = arm.ec_w / w_qb;
        let f_qb_bare = (8.0 * e_j * e_c).sqrt() - e_c;
        let f_res_bare = arm.v_res / l_res;

        let p_g = if self.cross_terms {
            self.constants.coupling_shape.p_g
        } else {
            1.0
        };
        let g = arm.g_0 * arm.w_ref * (w_res_qb / arm.w_ref).powf(p_g) / w_qb;

        let (f_qb, f_res) = if self.cross_terms {
            let shift = g * g / (f_qb_bare - f_res_bare);
            (f_qb_bare + shift, f_res_bare - shift)
        } else {
            (f_qb_bare, f_res_bare)
        };
        let alpha = e_c;
        let delta = f_qb - f_res;
        let chi = g * g * alpha / (delta * (delta - alpha));
        Ok(ArmOutput {
            f_res,
            f_qb,
            f_qb_bare,
            f_res_bare,
            alpha,
            chi,
        })
    }

    fn truth(&self, x: &DesignPoint) -> Result<ParameterVector, EvaluatorError> {
        let c = &self.constants;
        let arm1 = self.arm(&c.arm1, x, "1")?;
        let arm2 = self.arm(&c.arm2, x, "2")?;

        let l_c = positive(x, "L_c")?;
        let w_c = positive(x, "w_c")?;
        let w_c_qb_1 = positive(x, "w_c_qb_1")?;
        let w_c_qb_2 = positive(x, "w_c_qb_2")?;

        let e_j_c = c.coupler.ej_c / l_c;
        let e_c_c = c.coupler.ec_w_c / w_c;
        let f_c = (8.0 * e_j_c * e_c_c).sqrt() - e_c_c;
        let alpha_c = e_c_c;

        // The qubit-like modes (both qubits and the coupler) may reorder
        // among themselves, but none may approach the resonator group.
        let highest_low = arm1.f_qb_bare.max(arm2.f_qb_bare).max(f_c);
        let lowest_high = arm1.f_res_bare.min(arm2.f_res_bare);
        if highest_low + c.mode_order.margin >= lowest_high {
            return Err(EvaluatorError::ModeOrder(format!(
                "qubit-like modes reach {highest_low:.4} GHz, resonator modes start at \
                 {lowest_high:.4} GHz; separation under {:.2} GHz",
                c.mode_order.margin
            )));
        }
        if !(arm1.f_qb > 0.0) || !(arm2.f_qb > 0.0) || !(f_c > 0.0) {
            return Err(EvaluatorError::OutOfDomain(
                "a mode frequency collapsed to zero or below".into(),
            ));
        }

        let detuning = arm1.f_qb - f_c;
        if detuning < c.coupler_qubit.pole_margin {
            return Err(EvaluatorError::ModeOrder(format!(
                "coupler mode at {f_c:.4} GHz is within {:.3} GHz of qubit 1 at {:.4} GHz; \
                 dispersive coupling estimate is invalid",
                c.coupler_qubit.pole_margin, arm1.f_qb
            )));
        }
        let p_c = if self.cross_terms {
            c.coupler_qubit.p_c
        } else {
            1.0
        };
        let chi_c1 = c.coupler_qubit.ac_1 * w_c_qb_1.powf(-p_c) / detuning;
        let chi_c2 = c.coupler_qubit.ac_2 * w_c_qb_2.powf(-p_c) / detuning;

        Ok(ParameterVector::from([
            ("f_res_1".to_string(), arm1.f_res),
            ("f_res_2".to_string(), arm2.f_res),
            ("f_qb_1".to_string(), arm1.f_qb),
            ("f_qb_2".to_string(), arm2.f_qb),
            ("f_c".to_string(), f_c),
            ("alpha_1".to_string(), arm1.alpha),
            ("alpha_2".to_string(), arm2.alpha),
            ("alpha_c".to_string(), alpha_c),
            ("chi_1".to_string(), arm1.chi),
            ("chi_2".to_string(), arm2.chi),
            ("chi_c1".to_string(), chi_c1),
            ("chi_c2".to_string(), chi_c2),
        ]))
    }
}

impl Evaluator for TwoQubitSurrogate {
    fn parameter_names(&self) -> Vec<String> {
        [
            "f_res_1", "f_res_2", "f_qb_1", "f_qb_2", "f_c", "alpha_1", "alpha_2", "alpha_c",
            "chi_1", "chi_2", "chi_c1", "chi_c2",
        ]
        .map(String::from)
        .to_vec()
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

    pub(super) fn table_initial() -> DesignPoint {
        DesignPoint::from([
            ("l_res_1".into(), 4200.0),
            ("l_res_2".into(), 4200.0),
            ("L_qb_1".into(), 10.0),
            ("L_qb_2".into(), 12.0),
            ("L_c".into(), 2.0),
            ("w_qb_1".into(), 170.0),
            ("w_qb_2".into(), 170.0),
            ("w_c".into(), 250.0),
            ("w_res_qb_1".into(), 50.0),
            ("w_res_qb_2".into(), 50.0),
            ("w_c_qb_1".into(), 13.0),
            ("w_c_qb_2".into(), 15.0),
        ])
    }

    #[test]
    fn initial_point_outputs_are_finite_positive_and_complete() {
        let surrogate = TwoQubitSurrogate::new(true, false);
        let y = surrogate.evaluate(&table_initial(), 8, 0).unwrap();
        assert_eq!(y.len(), 12);
        for (name, value) in &y {
            assert!(value.is_finite() && *value > 0.0, "{name} = {value}");
        }
    }

    #[test]
    fn symmetric_arms_give_symmetric_outputs() {
        let mut constants = constants().clone();
        constants.arm2 = constants.arm1.clone();
        constants.coupler_qubit.ac_2 = constants.coupler_qubit.ac_1;
        let surrogate = TwoQubitSurrogate::with_constants(constants, true, false);
        let mut x = table_initial();
        x.insert("L_qb_2".into(), 10.0);
        x.insert("w_c_qb_2".into(), 13.0);
        let y = surrogate.evaluate(&x, 8, 0).unwrap();
        assert_eq!(y["f_qb_1"], y["f_qb_2"]);
        assert_eq!(y["f_res_1"], y["f_res_2"]);
        assert_eq!(y["alpha_1"], y["alpha_2"]);
        assert_eq!(y["chi_1"], y["chi_2"]);
        assert_eq!(y["chi_c1"], y["chi_c2"]);
    }

    #[test]
    fn widening_coupler_qubit_gap_weakens_the_coupling() {
        let surrogate = TwoQubitSurrogate::new(true, false);
        let base = surrogate.evaluate(&table_initial(), 8, 0).unwrap();
        let mut x = table_initial();
        x.insert("w_c_qb_1".into(), 20.0);
        let far = surrogate.evaluate(&x, 8, 0).unwrap();
        assert!(far["chi_c1"] < base["chi_c1"]);
        assert_eq!(far["chi_c2"], base["chi_c2"]);
    }

    #[test]
    fn coupler_approaching_qubit_1_is_a_mode_order_error() {
        let surrogate = TwoQubitSurrogate::new(true, false);
        let mut x = table_initial();
        // Shrinking L_c raises f_c through f_qb_1.
        x.insert("L_c".into(), 1.0);
        let err = surrogate.evaluate(&x, 8, 0).unwrap_err();
        assert!(matches!(err, EvaluatorError::ModeOrder(_)), "{err}");
    }

    #[test]
    fn qubit_group_must_stay_below_resonator_group() {
        let surrogate = TwoQubitSurrogate::new(true, false);
        let mut x = table_initial();
        x.insert("l_res_2".into(), 8000.0);
        let err = surrogate.evaluate(&x, 8, 0).unwrap_err();
        assert!(matches!(err, EvaluatorError::ModeOrder(_)), "{err}");
    }

    #[test]
    fn noise_free_evaluation_ignores_seed() {
        let surrogate = TwoQubitSurrogate::new(true, false);
        let a = surrogate.evaluate(&table_initial(), 8, 3).unwrap();
        let b = surrogate.evaluate(&table_initial(), 8, 4).unwrap();
        assert_eq!(a, b);
    }
}
