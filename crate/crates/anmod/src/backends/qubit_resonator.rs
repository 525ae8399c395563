//! Surrogate physics for a transmon qubit coupled to a readout resonator
//! with a feedline tap.
//!
//! Stands in for an eigenmode simulation: closed-form circuit relations with
//! deliberately richer structure than the proportionality models a user would
//! declare, so the update loop has real model error to work against. The
//! cross-term switch removes the extra structure, leaving exact power laws
//! (useful for sweep-and-fit checks).
//!
//! Units: GHz, µm, nH, fF. Output parameters: `f_res`, `f_qb`, `alpha`,
//! `chi`, `kappa_res`, plus the coupling `g_qb_res` as an auxiliary output.

use std::sync::OnceLock;

use serde::Deserialize;

use super::{positive, EvaluatorError};
use crate::backends::noise::NoiseModel;
use crate::backends::Evaluator;
use crate::problem::{DesignPoint, ParameterVector};

#[derive(Debug, Clone, Deserialize)]
pub struct Transmon {
    /// E_J = ej_scale / L_qb.
    pub ej_scale: f64,
    /// E_C = ec_scale / (c_w * w_qb).
    pub ec_scale: f64,
    /// Pad capacitance per unit width, fF/µm.
    pub c_w: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Resonator {
    /// f_res (bare) = v_res / l_res.
    pub v_res: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Coupling {
    /// g = g_0 * w_ref * (w_res_qb / w_ref)^p_g / w_qb.
    pub g_0: f64,
    pub w_ref: f64,
    /// Sub-linear claw exponent; 1 with cross-terms disabled.
    pub p_g: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Kappa {
    /// kappa = k2 * l^2 * (l / l_sat)^p_sat (saturation only with cross-terms).
    pub k2: f64,
    pub l_sat: f64,
    pub p_sat: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModeOrder {
    /// Required bare separation f_res - f_qb before the modes count as crossed.
    pub margin: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QubitResonatorConstants {
    pub transmon: Transmon,
    pub resonator: Resonator,
    pub coupling: Coupling,
    pub kappa: Kappa,
    pub mode_order: ModeOrder,
    pub noise: NoiseModel,
}

static CONSTANTS: OnceLock<QubitResonatorConstants> = OnceLock::new();

/// Calibrated constants baked into the binary.
pub fn constants() -> &'static QubitResonatorConstants {
    CONSTANTS.get_or_init(|| {
        toml::from_str(include_str!("../../data/qubit_resonator.toml"))
            .expect("embedded qubit_resonator.toml must parse")
    })
}

/// Evaluator for the qubit-resonator system.
#[derive(Debug, Clone)]
pub struct QubitResonatorSurrogate {
    constants: QubitResonatorConstants,
    cross_terms: bool,
    noise: bool,
}

impl QubitResonatorSurrogate {
    pub fn new(cross_terms: bool, noise: bool) -> Self {
        Self {
            constants: constants().clone(),
            cross_terms,
            noise,
        }
    }

    pub fn with_constants(
        constants: QubitResonatorConstants,
        cross_terms: bool,
        noise: bool,
    ) -> Self {
        Self {
            constants,
            cross_terms,
            noise,
        }
    }

    fn truth(&self, x: &DesignPoint) -> Result<ParameterVector, EvaluatorError> {
        let c = &self.constants;
        let l_res = positive(x, "l_res")?;
        let l_qb = positive(x, "L_qb")?;
        let w_qb = positive(x, "w_qb")?;
        let w_res_qb = positive(x, "w_res_qb")?;
        let l_res_tl = positive(x, "l_res_tl")?;

        let e_j = c.transmon.ej_scale / l_qb;
        let e_c = c.transmon.ec_scale / (c.transmon.c_w * w_qb);
        let f_qb_bare = (8.0 * e_j * e_c).sqrt() - e_c;
        let f_res_bare = c.resonator.v_res / l_res;
        if f_qb_bare + c.mode_order.margin >= f_res_bare {
            return Err(EvaluatorError::ModeOrder(format!(
                "qubit mode at {f_qb_bare:.4} GHz is not below the resonator mode at \
                 {f_res_bare:.4} GHz by the required {:.2} GHz",
                c.mode_order.margin
            )));
        }

        let p_g = if self.cross_terms {
            c.coupling.p_g
        } else {
            1.0
        };
        let g = c.coupling.g_0 * c.coupling.w_ref * (w_res_qb / c.coupling.w_ref).powf(p_g) / w_qb;

        // Dispersive dressing pulls the two modes apart; skipped without
        // cross-terms so f_res stays an exact power law in l_res.
        let (f_qb, f_res) = if self.cross_terms {
            let shift = g * g / (f_qb_bare - f_res_bare);
            (f_qb_bare + shift, f_res_bare - shift)
        } else {
            (f_qb_bare, f_res_bare)
        };
        if !(f_qb > 0.0) || f_qb >= f_res {
            return Err(EvaluatorError::ModeOrder(format!(
                "dressed qubit mode at {f_qb:.4} GHz crossed the resonator mode at {f_res:.4} GHz"
            )));
        }

        let alpha = e_c;
        let delta = f_qb - f_res;
        let chi = g * g * alpha / (delta * (delta - alpha));

        let kappa = if self.cross_terms {
            c.kappa.k2 * l_res_tl * l_res_tl * (l_res_tl / c.kappa.l_sat).powf(c.kappa.p_sat)
        } else {
            c.kappa.k2 * l_res_tl * l_res_tl
        };

        Ok(ParameterVector::from([
            ("f_res".to_string(), f_res),
            ("f_qb".to_string(), f_qb),
            ("alpha".to_string(), alpha),
            ("chi".to_string(), chi),
            ("kappa_res".to_string(), kappa),
            ("g_qb_res".to_string(), g),
        ]))
    }
}

impl Evaluator for QubitResonatorSurrogate {
    fn parameter_names(&self) -> Vec<String> {
        ["f_res", "f_qb", "alpha", "chi", "kappa_res", "g_qb_res"]
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
