//! An evaluator whose ground truth *is* the declared model, `y_i = c_i * f_i`.
//!
//! With zero model error the update step should land every monomial block on
//! its target in a single iteration; this backend exists to pin that oracle
//! in tests and to give users a fast dry-run of a formulation before paying
//! for real simulations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Evaluator, EvaluatorError};
use crate::expression::Environment;
use crate::problem::{DesignPoint, ParameterVector, ProblemFormulation};

/// Ground truth equal to the declared proportionality models, scaled by
/// per-parameter coefficients.
#[derive(Debug, Clone)]
pub struct PerfectModelEvaluator {
    formulation: ProblemFormulation,
    coefficients: BTreeMap<String, f64>,
    /// Parameter indices in dependency order (models and derivations may
    /// reference other parameters).
    eval_order: Vec<usize>,
}

impl PerfectModelEvaluator {
    /// Builds the evaluator with explicit coefficients, one per targeted
    /// parameter.
    pub fn new(
        formulation: &ProblemFormulation,
        coefficients: BTreeMap<String, f64>,
    ) -> Result<Self, String> {
        let eval_order = evaluation_order(formulation)?;
        for parameter in formulation.parameters() {
            if parameter.is_untargeted() {
                return Err(format!(
                    "parameter {} has no model; a perfect-model evaluator needs a model or \
                     derivation for every parameter",
                    parameter.name
                ));
            }
            if parameter.is_targeted() && !coefficients.contains_key(&parameter.name) {
                return Err(format!(
                    "missing coefficient for parameter {}",
                    parameter.name
                ));
            }
        }
        Ok(Self {
            formulation: formulation.clone(),
            coefficients,
            eval_order,
        })
    }

    /// Chooses coefficients so that evaluating at `x_star` returns exactly
    /// the declared targets.
    pub fn calibrated(
        formulation: &ProblemFormulation,
        x_star: &DesignPoint,
    ) -> Result<Self, String> {
        let mut env = formulation.targets();
        env = formulation
            .resolve_derived(&env)
            .map_err(|e| format!("cannot resolve derived parameters at the target point: {e}"))?;
        let mut coefficients = BTreeMap::new();
        for parameter in formulation.parameters() {
            let (Some(target), Some(model)) = (parameter.target(), parameter.model()) else {
                continue;
            };
            let value = model
                .evaluate(&Environment::new(x_star, &env))
                .map_err(|e| {
                    format!(
                        "model for {} fails at the calibration point: {e}",
                        parameter.name
                    )
                })?;
            if value == 0.0 || !value.is_finite() {
                return Err(format!(
                    "model for {} evaluates to {value} at the calibration point; cannot scale to \
                     the target",
                    parameter.name
                ));
            }
            coefficients.insert(parameter.name.clone(), target / value);
        }
        Self::new(formulation, coefficients)
    }

    pub fn coefficients(&self) -> &BTreeMap<String, f64> {
        &self.coefficients
    }
}

/// Topological order over parameters linked by model/derivation references.
fn evaluation_order(formulation: &ProblemFormulation) -> Result<Vec<usize>, String> {
    let parameters = formulation.parameters();
    let index_of: BTreeMap<&str, usize> = parameters
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.as_str(), i))
        .collect();
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); parameters.len()];
    let mut pending: Vec<usize> = vec![0; parameters.len()];
    for (i, parameter) in parameters.iter().enumerate() {
        let expr = parameter.model().or_else(|| parameter.derivation());
        let Some(expr) = expr else { continue };
        let free = expr
            .free_variables()
            .map_err(|e| format!("model for {} is not fully bound: {e}", parameter.name))?;
        for name in &free.parameters {
            if let Some(&dep) = index_of.get(name.as_str()) {
                dependents[dep].push(i);
                pending[i] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..parameters.len()).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(parameters.len());
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &next in &dependents[i] {
            pending[next] -= 1;
            if pending[next] == 0 {
                queue.push_back(next);
            }
        }
    }
    if order.len() != parameters.len() {
        let cycle: BTreeSet<&str> = (0..parameters.len())
            .filter(|&i| pending[i] > 0)
            .map(|i| parameters[i].name.as_str())
            .collect();
        return Err(format!(
            "parameter references form a cycle: [{}]",
            cycle.into_iter().collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(order)
}

impl Evaluator for PerfectModelEvaluator {
    fn parameter_names(&self) -> Vec<String> {
        self.formulation
            .parameters()
            .iter()
            .filter(|p| p.is_targeted())
            .map(|p| p.name.clone())
            .collect()
    }

    fn evaluate(
        &self,
        x: &DesignPoint,
        _fidelity: u32,
        _rng_seed: u64,
    ) -> Result<ParameterVector, EvaluatorError> {
        let parameters = self.formulation.parameters();
        let mut values = ParameterVector::new();
        for &i in &self.eval_order {
            let parameter = &parameters[i];
            let expr = parameter
                .model()
                .or_else(|| parameter.derivation())
                .expect("constructor rejected parameters without expressions");
            let value = expr
                .evaluate(&Environment::new(x, &values))
                .map_err(|e| EvaluatorError::Other(format!("{}: {e}", parameter.name)))?;
            let value = match self.coefficients.get(&parameter.name) {
                Some(c) => c * value,
                None => value,
            };
            values.insert(parameter.name.clone(), value);
        }
        // Derived parameters are the run loop's responsibility; report only
        // what a simulation would measure.
        for parameter in parameters {
            if parameter.is_derived() {
                values.remove(&parameter.name);
            }
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{DesignVariable, Parameter};

    fn formulation() -> ProblemFormulation {
        ProblemFormulation::new(
            "perfect",
            vec![
                DesignVariable::new("l_res", 7500.0, 4000.0, 12000.0),
                DesignVariable::new("w_qb", 400.0, 100.0, 1100.0),
            ],
            vec![
                Parameter::targeted("f_res", 6.0, "1 / l_res").unwrap(),
                Parameter::targeted("alpha", 0.2, "1 / w_qb").unwrap(),
                Parameter::derived("delta", "f_res - alpha").unwrap(),
                Parameter::targeted("chi", 0.001, "alpha / delta").unwrap(),
            ],
        )
    }

    #[test]
    fn calibrated_evaluator_hits_targets_at_the_calibration_point() {
        let pf = formulation();
        let x_star = DesignPoint::from([("l_res".into(), 8200.0), ("w_qb".into(), 380.0)]);
        let evaluator = PerfectModelEvaluator::calibrated(&pf, &x_star).unwrap();
        let y = evaluator.evaluate(&x_star, 8, 0).unwrap();
        assert!((y["f_res"] - 6.0).abs() < 1e-12);
        assert!((y["alpha"] - 0.2).abs() < 1e-12);
        assert!((y["chi"] - 0.001).abs() < 1e-12);
        assert!(!y.contains_key("delta"));
    }

    #[test]
    fn chi_sees_the_derived_delta_computed_from_its_own_outputs() {
        let pf = formulation();
        let x_star = DesignPoint::from([("l_res".into(), 8200.0), ("w_qb".into(), 380.0)]);
        let evaluator = PerfectModelEvaluator::calibrated(&pf, &x_star).unwrap();
        let x = DesignPoint::from([("l_res".into(), 7000.0), ("w_qb".into(), 300.0)]);
        let y = evaluator.evaluate(&x, 8, 0).unwrap();
        let delta = y["f_res"] - y["alpha"];
        let expected = evaluator.coefficients()["chi"] * y["alpha"] / delta;
        assert!((y["chi"] - expected).abs() < 1e-15);
    }

    #[test]
    fn untargeted_parameters_are_rejected() {
        let pf = ProblemFormulation::new(
            "with-untargeted",
            vec![DesignVariable::new("l", 1.0, 0.1, 10.0)],
            vec![
                Parameter::targeted("f", 1.0, "1 / l").unwrap(),
                Parameter::untargeted("g"),
            ],
        );
        let x = DesignPoint::from([("l".into(), 1.0)]);
        let err = PerfectModelEvaluator::calibrated(&pf, &x).unwrap_err();
        assert!(err.contains("g"), "{err}");
    }

    #[test]
    fn reference_cycles_are_rejected() {
        let pf = ProblemFormulation::new(
            "cyclic",
            vec![DesignVariable::new("l", 1.0, 0.1, 10.0)],
            vec![
                Parameter::targeted("a", 1.0, "l * b").unwrap(),
                Parameter::targeted("b", 1.0, "l * a").unwrap(),
            ],
        );
        let x = DesignPoint::from([("l".into(), 1.0)]);
        let err = PerfectModelEvaluator::calibrated(&pf, &x).unwrap_err();
        assert!(err.contains("cycle"), "{err}");
    }

    #[test]
    fn zero_model_value_at_calibration_point_is_rejected() {
        let pf = ProblemFormulation::new(
            "degenerate",
            vec![DesignVariable::new("l", 1.0, -10.0, 10.0)],
            vec![Parameter::targeted("f", 1.0, "l - 1").unwrap()],
        );
        let x = DesignPoint::from([("l".into(), 1.0)]);
        let err = PerfectModelEvaluator::calibrated(&pf, &x).unwrap_err();
        assert!(err.contains('f'), "{err}");
    }
}
