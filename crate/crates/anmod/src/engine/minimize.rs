//! Per-block cost minimization: closed-form inversion when the model is a
//! power law in the block's single variable, bounded pattern search
//! otherwise.

use super::{CostContext, UpdateError, UpdateSettings};
use crate::problem::{Block, DesignPoint, ParameterVector, ProblemFormulation};

/// Probe agreement required to accept the power-law fast path.
const MONOMIAL_LOG_TOLERANCE: f64 = 1e-9;
/// Pattern-search steps below this fraction of a variable's range count as
/// fully refined.
const STEP_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct BlockSolution {
    /// Solved values for the block's variables only.
    pub values: DesignPoint,
    /// Variables whose optimum lay outside bounds and was clamped.
    pub clamped: Vec<String>,
    /// Block cost at the solution.
    pub cost: f64,
    /// Cost/model evaluations spent.
    pub evaluations: usize,
}

/// Minimizes one block's cost contribution starting from `x_old`.
pub fn minimize_block(
    pf: &ProblemFormulation,
    block: &Block,
    x_old: &DesignPoint,
    y_old: &ParameterVector,
    settings: &UpdateSettings,
) -> Result<BlockSolution, UpdateError> {
    let ctx = CostContext::new(pf, x_old, y_old)?;
    minimize_block_with_context(&ctx, block, x_old, settings)
}

/// As [`minimize_block`], but reusing a prepared cost context and a base
/// design that may already contain earlier blocks' solutions.
pub(crate) fn minimize_block_with_context(
    ctx: &CostContext,
    block: &Block,
    x_base: &DesignPoint,
    settings: &UpdateSettings,
) -> Result<BlockSolution, UpdateError> {
    if block.parameter_indices.len() == 1 {
        if let Some(solution) = try_power_law(ctx, block, x_base, settings)? {
            return Ok(solution);
        }
    }
    pattern_search(ctx, block, x_base, settings)
}

/// Closed-form inversion for a 1-D block whose model is a power law c·v^p
/// along its variable, detected by two probe evaluations and verified at a
/// third. Returns None when the shape test fails, deferring to the search.
fn try_power_law(
    ctx: &CostContext,
    block: &Block,
    x_base: &DesignPoint,
    settings: &UpdateSettings,
) -> Result<Option<BlockSolution>, UpdateError> {
    let pf = ctx.formulation();
    let i = *block.parameter_indices.iter().next().expect("1-D block");
    let j = *block.variable_indices.iter().next().expect("1-D block");
    let var = &pf.design_variables()[j];

    let v1 = match x_base.get(&var.name) {
        Some(&v) if v > 0.0 => v,
        _ => return Ok(None), // log probing needs a positive seed
    };
    let mut v2 = 2.0 * v1;
    if v2 > var.upper_bound {
        v2 = v1 / 2.0;
    }
    if v2 < var.lower_bound {
        v2 = 0.5 * (v1 + var.upper_bound);
        if v2 == v1 {
            v2 = 0.5 * (v1 + var.lower_bound);
        }
    }
    if !(v2 > 0.0) || v2 == v1 {
        return Ok(None);
    }

    let mut x = x_base.clone();
    let probe = |v: f64, x: &mut DesignPoint| -> Option<f64> {
        x.insert(var.name.clone(), v);
        match ctx.numerator(i, x) {
            Ok(g) if g.is_finite() && g != 0.0 => Some(g),
            _ => None,
        }
    };

    let (g1, g2) = match (probe(v1, &mut x), probe(v2, &mut x)) {
        (Some(a), Some(b)) if a.signum() == b.signum() => (a, b),
        _ => return Ok(None),
    };
    let p = (g2 / g1).ln() / (v2 / v1).ln();
    if !p.is_finite() || p.abs() < 1e-12 {
        return Ok(None);
    }
    // Verify the fitted exponent off the probe pair.
    let v3 = (v1 * v2).sqrt();
    let g3 = match probe(v3, &mut x) {
        Some(g) => g,
        None => return Ok(None),
    };
    let log_misfit = ((g3 / g1).ln() - p * (v3 / v1).ln()).abs();
    if log_misfit > MONOMIAL_LOG_TOLERANCE * (g3 / g1).ln().abs().max(1.0) {
        return Ok(None);
    }

    // The block term vanishes where weight·g(v)/denominator = 1.
    let weight = ctx.weight_of(i);
    if weight == 0.0 {
        return Ok(None);
    }
    let g_wanted = ctx.denominator(i) / weight;
    let base = g_wanted / g1;
    if !(base > 0.0) {
        return Ok(None); // no real solution on this power law
    }
    let v_star = v1 * base.powf(1.0 / p);
    if !v_star.is_finite() {
        return Ok(None);
    }

    let v_final = var.clamp(v_star);
    let clamped = if v_final != v_star {
        vec![var.name.clone()]
    } else {
        Vec::new()
    };
    x.insert(var.name.clone(), v_final);
    let cost = ctx.partial_cost([i], &x)?;
    let _ = settings;
    Ok(Some(BlockSolution {
        values: DesignPoint::from([(var.name.clone(), v_final)]),
        clamped,
        cost,
        evaluations: 4,
    }))
}

/// Bounded derivative-free pattern search over the block's variables, seeded
/// at the current design: poll ± one step along each axis, keep improving
/// moves, halve all steps when a sweep stalls.
fn pattern_search(
    ctx: &CostContext,
    block: &Block,
    x_base: &DesignPoint,
    settings: &UpdateSettings,
) -> Result<BlockSolution, UpdateError> {
    let pf = ctx.formulation();
    let vars: Vec<_> = block
        .variable_indices
        .iter()
        .map(|&j| &pf.design_variables()[j])
        .collect();
    let params: Vec<usize> = block.parameter_indices.iter().copied().collect();

    let mut x = x_base.clone();
    let mut evaluations = 1usize;
    let mut current = ctx.partial_cost(params.iter().copied(), &x)?;
    let ranges: Vec<f64> = vars.iter().map(|v| v.upper_bound - v.lower_bound).collect();
    let mut steps: Vec<f64> = ranges.iter().map(|r| 0.25 * r).collect();

    'search: while current >= settings.cost_tolerance {
        let sweep_start = current;
        let mut improved = false;
        for (idx, var) in vars.iter().enumerate() {
            let here = x[&var.name];
            let mut best = (current, here);
            for candidate in [here + steps[idx], here - steps[idx]] {
                if evaluations >= settings.max_cost_evaluations {
                    x.insert(var.name.clone(), best.1);
                    current = best.0;
                    break 'search;
                }
                let candidate = var.clamp(candidate);
                if candidate == here {
                    continue;
                }
                x.insert(var.name.clone(), candidate);
                let c = ctx.partial_cost(params.iter().copied(), &x)?;
                evaluations += 1;
                if c < best.0 {
                    best = (c, candidate);
                }
            }
            x.insert(var.name.clone(), best.1);
            if best.0 < current {
                current = best.0;
                improved = true;
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
        let refined = steps.iter().zip(&ranges).all(|(s, r)| s / r < STEP_FLOOR);
        if sweep_start - current < settings.cost_tolerance && refined {
            break;
        }
        if evaluations >= settings.max_cost_evaluations {
            break;
        }
    }

    let mut values = DesignPoint::new();
    let mut clamped = Vec::new();
    for var in &vars {
        let v = x[&var.name];
        values.insert(var.name.clone(), v);
        // A solution resting on a bound with leftover cost means the
        // unconstrained optimum lies outside the box.
        if (v == var.lower_bound || v == var.upper_bound) && current > settings.cost_tolerance {
            clamped.push(var.name.clone());
        }
    }
    Ok(BlockSolution {
        values,
        clamped,
        cost: current,
        evaluations,
    })
}
