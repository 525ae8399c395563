//! The update engine: predict parameter movement from the declared models,
//! build the iteration cost, minimize it block by block, and drive the outer
//! evaluate/update loop.
//!
//! One iteration: evaluate the design (expensive), then for each targeted
//! parameter ask its proportionality model how the design must move so the
//! *predicted* parameter lands on target, damp the move by the adjustment
//! rate, clamp to bounds, and repeat. Only ratios of each model enter the
//! math, so model prefactors cancel and only scaling trends matter.

mod minimize;

pub use minimize::{minimize_block, BlockSolution};

use crate::backends::Evaluator;
use crate::expression::{Environment, EvalError};
use crate::problem::{
    Block, DerivedError, DesignPoint, FactorizeError, ParameterVector, ProblemFormulation,
};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

/// Knobs of the update loop.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSettings {
    /// γ ∈ (0, 1]: fraction of each proposed design move that is applied.
    pub adjustment_rate: f64,
    /// Block minimization stops once its cost falls below this.
    pub cost_tolerance: f64,
    /// Budget of cost evaluations per block minimization.
    pub max_cost_evaluations: usize,
    /// Relative tolerance on |y/target − 1| for declaring success.
    pub convergence_tolerance: f64,
    /// Update steps allowed before stopping with MAX_ITER.
    pub max_iterations: usize,
    /// DIVERGED when the max relative error exceeds this multiple of its
    /// starting value.
    pub divergence_factor: f64,
}

impl Default for UpdateSettings {
    fn default() -> Self {
        UpdateSettings {
            adjustment_rate: 1.0,
            cost_tolerance: 1e-10,
            max_cost_evaluations: 10_000,
            convergence_tolerance: 0.01,
            max_iterations: 10,
            divergence_factor: 8.0,
        }
    }
}

impl UpdateSettings {
    /// All violations, or empty when usable.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.adjustment_rate > 0.0 && self.adjustment_rate <= 1.0) {
            v.push(format!(
                "adjustment_rate must be in (0, 1], got {}",
                self.adjustment_rate
            ));
        }
        if !(self.cost_tolerance > 0.0) {
            v.push(format!(
                "cost_tolerance must be > 0, got {}",
                self.cost_tolerance
            ));
        }
        if self.max_cost_evaluations < 1 {
            v.push("max_cost_evaluations must be >= 1".to_string());
        }
        if !(self.convergence_tolerance > 0.0) {
            v.push(format!(
                "convergence_tolerance must be > 0, got {}",
                self.convergence_tolerance
            ));
        }
        if self.max_iterations < 1 {
            v.push("max_iterations must be >= 1".to_string());
        }
        if !(self.divergence_factor > 1.0) {
            v.push(format!(
                "divergence_factor must be > 1, got {}",
                self.divergence_factor
            ));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UpdateError {
    #[error("model for `{parameter}` has zero or non-finite denominator at the current design")]
    ModelDenominator { parameter: String },
    #[error("model for `{parameter}` failed to evaluate: {source}")]
    Eval {
        parameter: String,
        source: EvalError,
    },
    #[error("evaluated parameters missing `{0}`")]
    MissingParameter(String),
    #[error(transparent)]
    Derived(#[from] DerivedError),
    #[error(transparent)]
    Factorize(#[from] FactorizeError),
    #[error("non-finite cost in the search region: {detail}")]
    NonFiniteCost { detail: String },
}

/// Precomputed pieces of the iteration cost
/// C(x) = Σ_i ((y_i/T_i) · f_i(targets, x) / f_i(y^k, x^k) − 1)²
/// over targeted parameters i. The parameter environment inside the
/// numerator binds targeted parameters to their targets, untargeted ones to
/// their current values, and recomputes derived ones from that mix; the
/// denominator is evaluated once at the current design and current values.
pub(crate) struct CostContext<'a> {
    pf: &'a ProblemFormulation,
    /// Parameter bindings for the numerator models.
    target_params: ParameterVector,
    /// Targeted parameter index → f_i(y_old, x_old).
    denom: BTreeMap<usize, f64>,
    /// Targeted parameter index → y_old_i / target_i.
    weight: BTreeMap<usize, f64>,
    targeted: Vec<usize>,
}

impl<'a> CostContext<'a> {
    pub(crate) fn new(
        pf: &'a ProblemFormulation,
        x_old: &DesignPoint,
        y_old: &ParameterVector,
    ) -> Result<Self, UpdateError> {
        let y_old = pf.resolve_derived(y_old)?;

        let mut with_targets = y_old.clone();
        for p in pf.parameters() {
            if let Some(t) = p.target() {
                with_targets.insert(p.name.clone(), t);
            }
        }
        let target_params = pf.resolve_derived(&with_targets)?;

        let mut denom = BTreeMap::new();
        let mut weight = BTreeMap::new();
        let targeted = pf.targeted_indices();
        let env = Environment::new(x_old, &y_old);
        for &i in &targeted {
            let p = &pf.parameters()[i];
            let model = p.model().expect("targeted parameter has a model");
            let d = model.evaluate(&env).map_err(|source| UpdateError::Eval {
                parameter: p.name.clone(),
                source,
            })?;
            if d == 0.0 || !d.is_finite() {
                return Err(UpdateError::ModelDenominator {
                    parameter: p.name.clone(),
                });
            }
            let y_i = *y_old
                .get(&p.name)
                .ok_or_else(|| UpdateError::MissingParameter(p.name.clone()))?;
            denom.insert(i, d);
            weight.insert(i, y_i / p.target().expect("targeted"));
        }

        Ok(CostContext {
            pf,
            target_params,
            denom,
            weight,
            targeted,
        })
    }

    /// Cost contribution of the given targeted parameters at design `x`.
    pub(crate) fn partial_cost(
        &self,
        parameter_indices: impl IntoIterator<Item = usize>,
        x: &DesignPoint,
    ) -> Result<f64, UpdateError> {
        let env = Environment::new(x, &self.target_params);
        let mut total = 0.0;
        for i in parameter_indices {
            let p = &self.pf.parameters()[i];
            let model = p.model().expect("targeted parameter has a model");
            let num = model.evaluate(&env).map_err(|source| UpdateError::Eval {
                parameter: p.name.clone(),
                source,
            })?;
            let term = self.weight[&i] * num / self.denom[&i] - 1.0;
            total += term * term;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(UpdateError::NonFiniteCost {
                detail: format!("total cost at x = {x:?}"),
            })
        }
    }

    pub(crate) fn total_cost(&self, x: &DesignPoint) -> Result<f64, UpdateError> {
        self.partial_cost(self.targeted.iter().copied(), x)
    }

    /// Model value of targeted parameter `i` in the numerator environment at
    /// design `x` (used by the monomial fast path).
    pub(crate) fn numerator(&self, i: usize, x: &DesignPoint) -> Result<f64, UpdateError> {
        let p = &self.pf.parameters()[i];
        let model = p.model().expect("targeted parameter has a model");
        model
            .evaluate(&Environment::new(x, &self.target_params))
            .map_err(|source| UpdateError::Eval {
                parameter: p.name.clone(),
                source,
            })
    }

    pub(crate) fn denominator(&self, i: usize) -> f64 {
        self.denom[&i]
    }

    pub(crate) fn weight_of(&self, i: usize) -> f64 {
        self.weight[&i]
    }

    pub(crate) fn formulation(&self) -> &ProblemFormulation {
        self.pf
    }
}

/// Predicts every parameter at `x_new` from its value at `x_old` scaled by
/// its model ratio. `y_sub` supplies the parameter values substituted inside
/// the models' numerators (the update uses targets there); names absent from
/// `y_sub` keep their `y_old` values. Untargeted parameters are carried over
/// bit-identically; derived parameters are recomputed from the predictions.
pub fn predict(
    pf: &ProblemFormulation,
    x_new: &DesignPoint,
    x_old: &DesignPoint,
    y_old: &ParameterVector,
    y_sub: &ParameterVector,
) -> Result<ParameterVector, UpdateError> {
    let y_old = pf.resolve_derived(y_old)?;

    let mut sub = y_old.clone();
    for p in pf.parameters() {
        if p.is_targeted() {
            if let Some(v) = y_sub.get(&p.name) {
                sub.insert(p.name.clone(), *v);
            }
        }
    }
    let num_params = pf.resolve_derived(&sub)?;

    let num_env = Environment::new(x_new, &num_params);
    let den_env = Environment::new(x_old, &y_old);

    let mut predicted = ParameterVector::new();
    for p in pf.parameters() {
        match p.model() {
            Some(model) => {
                let d = model
                    .evaluate(&den_env)
                    .map_err(|source| UpdateError::Eval {
                        parameter: p.name.clone(),
                        source,
                    })?;
                if d == 0.0 || !d.is_finite() {
                    return Err(UpdateError::ModelDenominator {
                        parameter: p.name.clone(),
                    });
                }
                let n = model
                    .evaluate(&num_env)
                    .map_err(|source| UpdateError::Eval {
                        parameter: p.name.clone(),
                        source,
                    })?;
                let y_i = *y_old
                    .get(&p.name)
                    .ok_or_else(|| UpdateError::MissingParameter(p.name.clone()))?;
                let value = y_i * n / d;
                if !value.is_finite() {
                    return Err(UpdateError::Eval {
                        parameter: p.name.clone(),
                        source: EvalError::NonFinite,
                    });
                }
                predicted.insert(p.name.clone(), value);
            }
            None if p.is_untargeted() => {
                let y_i = *y_old
                    .get(&p.name)
                    .ok_or_else(|| UpdateError::MissingParameter(p.name.clone()))?;
                predicted.insert(p.name.clone(), y_i);
            }
            None => {} // derived: recomputed below
        }
    }
    Ok(pf.resolve_derived(&predicted)?)
}

/// The iteration cost at candidate design `x`, given the previous design and
/// its evaluated parameters.
pub fn cost(
    pf: &ProblemFormulation,
    x: &DesignPoint,
    x_old: &DesignPoint,
    y_old: &ParameterVector,
) -> Result<f64, UpdateError> {
    CostContext::new(pf, x_old, y_old)?.total_cost(x)
}

/// Everything one update produces.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    /// The accepted next design (adjustment-rate filtered, clamped).
    pub x_new: DesignPoint,
    /// The unfiltered block solution.
    pub x_star: DesignPoint,
    /// Model predictions at `x_new` with targets substituted.
    pub predicted: ParameterVector,
    /// Total cost at `x_new`.
    pub cost: f64,
    /// Variables whose block solution was clamped to a bound.
    pub clamped: Vec<String>,
    /// Factorization used, in solve order.
    pub blocks: Vec<Block>,
    pub cost_evaluations: usize,
}

/// One full design update: factorize, minimize each block in solve order
/// (substituting the unfiltered solutions of earlier blocks into later
/// models), then damp the move by the adjustment rate and clamp to bounds.
pub fn update_step(
    pf: &ProblemFormulation,
    x_old: &DesignPoint,
    y_old: &ParameterVector,
    settings: &UpdateSettings,
) -> Result<UpdateOutcome, UpdateError> {
    let blocks = pf.factorize()?;
    let ctx = CostContext::new(pf, x_old, y_old)?;

    let mut x_star = x_old.clone();
    let mut clamped = Vec::new();
    let mut cost_evaluations = 0;
    for block in &blocks {
        let sol = minimize::minimize_block_with_context(&ctx, block, &x_star, settings)?;
        cost_evaluations += sol.evaluations;
        clamped.extend(sol.clamped.iter().cloned());
        for (name, value) in sol.values {
            x_star.insert(name, value);
        }
    }

    let mut x_new = DesignPoint::new();
    for v in pf.design_variables() {
        let old = *x_old.get(&v.name).ok_or_else(|| {
            UpdateError::MissingParameter(format!("design variable `{}`", v.name))
        })?;
        let star = x_star[&v.name];
        let moved = old + settings.adjustment_rate * (star - old);
        x_new.insert(v.name.clone(), v.clamp(moved));
    }

    let predicted = predict(pf, &x_new, x_old, y_old, &pf.targets())?;
    let cost = ctx.total_cost(&x_new)?;

    Ok(UpdateOutcome {
        x_new,
        x_star,
        predicted,
        cost,
        clamped,
        blocks,
        cost_evaluations,
    })
}

/// Largest relative target miss, max_i |y_i/T_i − 1| over targeted i.
/// Parameters missing from `y` count as infinitely wrong.
pub fn max_relative_error(pf: &ProblemFormulation, y: &ParameterVector) -> f64 {
    let mut worst: f64 = 0.0;
    for p in pf.parameters() {
        if let Some(t) = p.target() {
            let e = match y.get(&p.name) {
                Some(v) => (v / t - 1.0).abs(),
                None => f64::INFINITY,
            };
            worst = worst.max(e);
        }
    }
    worst
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Success,
    Diverged,
    MaxIter,
    EvaluatorError,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::Success => "SUCCESS",
            RunStatus::Diverged => "DIVERGED",
            RunStatus::MaxIter => "MAX_ITER",
            RunStatus::EvaluatorError => "EVALUATOR_ERROR",
        };
        f.write_str(s)
    }
}

/// One iteration of a run: the design that was evaluated, what came back,
/// and what the update predicted for the next iteration. The final record of
/// a run has no prediction and no blocks (no further update happened).
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub x: DesignPoint,
    /// Evaluated parameters, derived included.
    pub y: ParameterVector,
    /// Prediction for iteration k+1 at the accepted design; None on the
    /// terminal record.
    pub predicted_y: Option<ParameterVector>,
    /// Iteration cost: at the accepted next design for updating records, at
    /// the current design for terminal ones. None when uncomputable.
    pub cost: Option<f64>,
    /// Factorization used by this iteration's update; None on the terminal
    /// record.
    pub blocks: Option<Vec<Block>>,
    /// Seed handed to the evaluator for this iteration.
    pub seed: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// Failure detail for DIVERGED / EVALUATOR_ERROR endings.
    pub message: Option<String>,
}

/// Per-iteration evaluator seed, decorrelated from neighbors.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a golden-ratio stride.
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Drives the evaluate/update loop from the formulation's declared starting
/// design until success, divergence, the iteration cap, or an evaluator
/// failure. Returns Err only for an invalid formulation or settings.
pub fn run(
    pf: &ProblemFormulation,
    evaluator: &dyn Evaluator,
    fidelity: u32,
    settings: &UpdateSettings,
    master_seed: u64,
) -> Result<RunHistory, String> {
    let violations = settings.validate();
    if !violations.is_empty() {
        return Err(violations.join("; "));
    }
    let report = pf.validate();
    if !report.is_ok() {
        return Err(report.to_string());
    }

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut x = pf.initial_design();
    let mut error_at_start: Option<f64> = None;
    // Consecutive post-update iterations each variable has sat at a bound.
    let mut pinned: BTreeMap<String, u32> = pf
        .design_variables()
        .iter()
        .map(|v| (v.name.clone(), 0))
        .collect();
    let mut non_decreasing_cost: u32 = 0;
    let mut prev_cost: Option<f64> = None;

    let finish = |mut records: Vec<IterationRecord>,
                  terminal: IterationRecord,
                  status: RunStatus,
                  message: Option<String>| {
        records.push(terminal);
        Ok(RunHistory {
            records,
            status,
            message,
        })
    };

    let mut k = 0usize;
    loop {
        let seed_k = derive_seed(master_seed, k as u64);
        let started = Instant::now();

        let y_raw = match evaluator.evaluate(&x, fidelity, seed_k) {
            Ok(y) => y,
            Err(e) => {
                return Ok(RunHistory {
                    records,
                    status: RunStatus::EvaluatorError,
                    message: Some(format!("iteration {k}: {e}")),
                });
            }
        };
        // The declared parameters define the problem; extra backend outputs
        // are dropped, missing or broken ones end the run.
        let mut y = ParameterVector::new();
        let mut fault: Option<String> = None;
        for p in pf.parameters() {
            if p.is_derived() {
                continue;
            }
            match y_raw.get(&p.name) {
                Some(v) if v.is_finite() => {
                    y.insert(p.name.clone(), *v);
                }
                Some(v) => {
                    fault = Some(format!("iteration {k}: parameter `{}` is {v}", p.name));
                    break;
                }
                None => {
                    fault = Some(format!(
                        "iteration {k}: evaluator did not produce `{}`",
                        p.name
                    ));
                    break;
                }
            }
        }
        if let Some(message) = fault {
            return Ok(RunHistory {
                records,
                status: RunStatus::EvaluatorError,
                message: Some(message),
            });
        }
        let y = match pf.resolve_derived(&y) {
            Ok(y) => y,
            Err(e) => {
                return Ok(RunHistory {
                    records,
                    status: RunStatus::EvaluatorError,
                    message: Some(format!("iteration {k}: {e}")),
                });
            }
        };

        let rel = max_relative_error(pf, &y);
        let e0 = *error_at_start.get_or_insert(rel);

        let terminal_record = |wall: Duration| IterationRecord {
            k,
            x: x.clone(),
            y: y.clone(),
            predicted_y: None,
            cost: cost(pf, &x, &x, &y).ok(),
            blocks: None,
            seed: seed_k,
            wall_time: wall,
        };

        if rel < settings.convergence_tolerance {
            return finish(
                records,
                terminal_record(started.elapsed()),
                RunStatus::Success,
                None,
            );
        }
        if k > 0 && rel > settings.divergence_factor * e0 {
            let message = format!(
                "iteration {k}: max relative error {rel:.4} exceeded {} x starting error {e0:.4}",
                settings.divergence_factor
            );
            return finish(
                records,
                terminal_record(started.elapsed()),
                RunStatus::Diverged,
                Some(message),
            );
        }
        if k >= settings.max_iterations {
            return finish(
                records,
                terminal_record(started.elapsed()),
                RunStatus::MaxIter,
                None,
            );
        }

        let outcome = match update_step(pf, &x, &y, settings) {
            Ok(o) => o,
            Err(e) => {
                let message = Some(format!("iteration {k}: update aborted: {e}"));
                records.push(terminal_record(started.elapsed()));
                return Ok(RunHistory {
                    records,
                    status: RunStatus::EvaluatorError,
                    message,
                });
            }
        };

        records.push(IterationRecord {
            k,
            x: x.clone(),
            y,
            predicted_y: Some(outcome.predicted.clone()),
            cost: Some(outcome.cost),
            blocks: Some(outcome.blocks.clone()),
            seed: seed_k,
            wall_time: started.elapsed(),
        });

        // Divergence by pinning: a variable stuck on a bound while the cost
        // refuses to drop means the model keeps asking for an infeasible
        // design. Heuristic window: 3 consecutive pinned updates with
        // non-decreasing cost.
        let mut any_pinned = false;
        for v in pf.design_variables() {
            let value = outcome.x_new[&v.name];
            let counter = pinned.get_mut(&v.name).expect("initialized above");
            if value <= v.lower_bound || value >= v.upper_bound {
                *counter += 1;
            } else {
                *counter = 0;
            }
            any_pinned |= *counter >= 3;
        }
        non_decreasing_cost = match prev_cost {
            Some(prev) if outcome.cost >= prev => non_decreasing_cost + 1,
            _ => 0,
        };
        prev_cost = Some(outcome.cost);
        if any_pinned && non_decreasing_cost >= 2 {
            let stuck: Vec<&str> = pf
                .design_variables()
                .iter()
                .filter(|v| pinned[&v.name] >= 3)
                .map(|v| v.name.as_str())
                .collect();
            let message = format!(
                "iteration {k}: variable(s) [{}] pinned at a bound for 3 updates with non-decreasing cost",
                stuck.join(", ")
            );
            return Ok(RunHistory {
                records,
                status: RunStatus::Diverged,
                message: Some(message),
            });
        }

        x = outcome.x_new;
        k += 1;
    }
}
