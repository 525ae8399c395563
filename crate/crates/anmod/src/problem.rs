//! Problem formulations: design variables, parameters with targets and
//! models, derived parameters, and the factorization of the update into
//! independent minimization blocks.
//!
//! A formulation is square: as many targeted parameters as design variables.
//! Each targeted parameter carries a proportionality model (how it scales
//! with the design), each derived parameter carries a derivation over other
//! parameters, and untargeted parameters are reported but never optimized.

use crate::expression::{BindError, Environment, EvalError, ModelExpression, ParseError};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Design-variable values by name.
pub type DesignPoint = BTreeMap<String, f64>;
/// Parameter values by name.
pub type ParameterVector = BTreeMap<String, f64>;

/// A layout quantity the optimizer may change, with hard box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVariable {
    pub name: String,
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Display-only unit label (the engine is unit-blind).
    pub unit: Option<String>,
}

impl DesignVariable {
    pub fn new(name: &str, value: f64, lower_bound: f64, upper_bound: f64) -> Self {
        DesignVariable {
            name: name.to_string(),
            value,
            lower_bound,
            upper_bound,
            unit: None,
        }
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = Some(unit.to_string());
        self
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower_bound, self.upper_bound)
    }
}

/// What role a parameter plays in the optimization.
#[derive(Debug, Clone, PartialEq)]
pub enum ParameterKind {
    /// Optimized toward `target` using the proportionality `model`.
    Targeted { target: f64, model: ModelExpression },
    /// Reported only; predicted to stay constant across an update.
    Untargeted,
    /// Computed from other parameters (e.g. a difference frequency).
    Derived { derivation: ModelExpression },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub kind: ParameterKind,
    /// Display-only unit label.
    pub unit: Option<String>,
}

impl Parameter {
    pub fn targeted(name: &str, target: f64, model: &str) -> Result<Self, ParseError> {
        Ok(Parameter {
            name: name.to_string(),
            kind: ParameterKind::Targeted {
                target,
                model: model.parse()?,
            },
            unit: None,
        })
    }

    pub fn untargeted(name: &str) -> Self {
        Parameter {
            name: name.to_string(),
            kind: ParameterKind::Untargeted,
            unit: None,
        }
    }

    pub fn derived(name: &str, derivation: &str) -> Result<Self, ParseError> {
        Ok(Parameter {
            name: name.to_string(),
            kind: ParameterKind::Derived {
                derivation: derivation.parse()?,
            },
            unit: None,
        })
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = Some(unit.to_string());
        self
    }

    pub fn is_targeted(&self) -> bool {
        matches!(self.kind, ParameterKind::Targeted { .. })
    }

    pub fn is_untargeted(&self) -> bool {
        matches!(self.kind, ParameterKind::Untargeted)
    }

    pub fn is_derived(&self) -> bool {
        matches!(self.kind, ParameterKind::Derived { .. })
    }

    pub fn target(&self) -> Option<f64> {
        match &self.kind {
            ParameterKind::Targeted { target, .. } => Some(*target),
            _ => None,
        }
    }

    pub fn model(&self) -> Option<&ModelExpression> {
        match &self.kind {
            ParameterKind::Targeted { model, .. } => Some(model),
            _ => None,
        }
    }

    pub fn derivation(&self) -> Option<&ModelExpression> {
        match &self.kind {
            ParameterKind::Derived { derivation } => Some(derivation),
            _ => None,
        }
    }
}

/// Result of [`ProblemFormulation::validate`]: empty means the formulation
/// is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            writeln!(f, "ok")
        } else {
            for v in &self.violations {
                writeln!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// A square subset of (targeted parameters, design variables) that can be
/// minimized on its own. Indices point into the formulation's declaration
/// lists. Blocks are solved in ascending `solve_order`; a block's models may
/// reference variables of earlier blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub parameter_indices: BTreeSet<usize>,
    pub variable_indices: BTreeSet<usize>,
    pub solve_order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactorizeError {
    #[error(
        "structurally unsolvable system: component with parameters [{}] and variables [{}] is not square",
        .parameters.join(", "),
        .variables.join(", ")
    )]
    Unsolvable {
        parameters: Vec<String>,
        variables: Vec<String>,
    },
    #[error("formulation is not valid: {0}")]
    InvalidFormulation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerivedError {
    #[error("cycle among derived parameters: [{}]", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("derivation for `{parameter}` failed: {source}")]
    Eval {
        parameter: String,
        source: EvalError,
    },
}

/// The full declarative problem: what may move, what is measured, and what
/// the measurements should become.
#[derive(Debug, Clone)]
pub struct ProblemFormulation {
    name: String,
    design_variables: Vec<DesignVariable>,
    parameters: Vec<Parameter>,
    // Bind problems found at construction, reported by validate(). Each entry
    // is (owning parameter, error).
    bind_errors: Vec<(String, BindError)>,
}

impl ProblemFormulation {
    /// Builds a formulation and binds every model and derivation against the
    /// declared names. Construction never fails; problems (including
    /// undeclared references) surface through [`validate`](Self::validate).
    pub fn new(
        name: &str,
        design_variables: Vec<DesignVariable>,
        mut parameters: Vec<Parameter>,
    ) -> Self {
        let design_names: BTreeSet<String> =
            design_variables.iter().map(|v| v.name.clone()).collect();
        let parameter_names: BTreeSet<String> = parameters.iter().map(|p| p.name.clone()).collect();

        let mut bind_errors = Vec::new();
        for p in &mut parameters {
            let owner = p.name.clone();
            let expr = match &mut p.kind {
                ParameterKind::Targeted { model, .. } => Some(model),
                ParameterKind::Derived { derivation } => Some(derivation),
                ParameterKind::Untargeted => None,
            };
            if let Some(expr) = expr {
                if let Err(errs) = expr.bind(&design_names, &parameter_names, Some(&owner)) {
                    bind_errors.extend(errs.into_iter().map(|e| (owner.clone(), e)));
                }
            }
        }

        ProblemFormulation {
            name: name.to_string(),
            design_variables,
            parameters,
            bind_errors,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn design_variables(&self) -> &[DesignVariable] {
        &self.design_variables
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn variable(&self, name: &str) -> Option<&DesignVariable> {
        self.design_variables.iter().find(|v| v.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn targeted_indices(&self) -> Vec<usize> {
        (0..self.parameters.len())
            .filter(|&i| self.parameters[i].is_targeted())
            .collect()
    }

    /// The declared starting design.
    pub fn initial_design(&self) -> DesignPoint {
        self.design_variables
            .iter()
            .map(|v| (v.name.clone(), v.value))
            .collect()
    }

    /// Targeted parameters bound to their target values.
    pub fn targets(&self) -> ParameterVector {
        self.parameters
            .iter()
            .filter_map(|p| p.target().map(|t| (p.name.clone(), t)))
            .collect()
    }

    /// Clamps every entry of `x` into its variable's bounds. Unknown names
    /// pass through untouched.
    pub fn clamp_to_bounds(&self, x: &mut DesignPoint) {
        for v in &self.design_variables {
            if let Some(value) = x.get_mut(&v.name) {
                *value = v.clamp(*value);
            }
        }
    }

    /// Checks every structural invariant and reports all violations. Never
    /// mutates; an empty report means the formulation is usable.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let n_targeted = self.parameters.iter().filter(|p| p.is_targeted()).count();
        let n_vars = self.design_variables.len();
        if n_targeted != n_vars {
            violations.push(format!(
                "square-system mismatch: {n_targeted} targeted parameters vs {n_vars} design variables"
            ));
        }

        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for name in self
            .design_variables
            .iter()
            .map(|v| v.name.as_str())
            .chain(self.parameters.iter().map(|p| p.name.as_str()))
        {
            *seen.entry(name).or_insert(0) += 1;
        }
        for (name, count) in seen {
            if count > 1 {
                violations.push(format!(
                    "name `{name}` declared {count} times; names must be unique across design variables and parameters"
                ));
            }
        }

        for (owner, err) in &self.bind_errors {
            violations.push(format!("model for `{owner}`: {err}"));
        }

        for v in &self.design_variables {
            let all_finite =
                v.value.is_finite() && v.lower_bound.is_finite() && v.upper_bound.is_finite();
            if !all_finite {
                violations.push(format!(
                    "design variable `{}`: non-finite value or bound",
                    v.name
                ));
                continue;
            }
            if v.lower_bound >= v.upper_bound {
                violations.push(format!(
                    "design variable `{}`: lower bound {} must be below upper bound {}",
                    v.name, v.lower_bound, v.upper_bound
                ));
            }
            if v.value < v.lower_bound || v.value > v.upper_bound {
                violations.push(format!(
                    "design variable `{}`: value {} outside bounds [{}, {}]",
                    v.name, v.value, v.lower_bound, v.upper_bound
                ));
            }
        }

        for p in &self.parameters {
            if let Some(target) = p.target() {
                if target == 0.0 {
                    violations.push(format!(
                        "parameter `{}`: target must be nonzero (relative errors divide by it)",
                        p.name
                    ));
                } else if !target.is_finite() {
                    violations.push(format!("parameter `{}`: non-finite target", p.name));
                }
            }
            // Derivations may only use other parameters; a design-variable
            // reference would make the "recompute derived from parameters"
            // rule ill-defined mid-update.
            if let Some(derivation) = p.derivation() {
                if let Ok(fv) = derivation.free_variables() {
                    for var in fv.design {
                        violations.push(format!(
                            "derivation for `{}` references design variable `{var}`; derivations may only use parameters",
                            p.name
                        ));
                    }
                }
            }
        }

        if let Err(cycle) = self.derived_order() {
            violations.push(format!(
                "cycle among derived parameters: [{}]",
                cycle.join(", ")
            ));
        }

        // A variable no model mentions can never be solved for, so the square
        // system is unsolvable even when the counts match.
        let mut used: BTreeSet<&str> = BTreeSet::new();
        for p in &self.parameters {
            if let Some(model) = p.model() {
                if let Ok(fv) = model.free_variables() {
                    for name in fv.design {
                        if let Some(v) = self.design_variables.iter().find(|v| v.name == name) {
                            used.insert(v.name.as_str());
                        }
                    }
                }
            }
        }
        for v in &self.design_variables {
            if !used.contains(v.name.as_str()) {
                violations.push(format!(
                    "design variable `{}` appears in no model; the square system cannot be solved for it",
                    v.name
                ));
            }
        }

        ValidationReport { violations }
    }

    /// Splits the square system into independently solvable blocks.
    ///
    /// Edges couple a targeted parameter to the design variables its model
    /// references; parameter-to-parameter references create no edges (inside
    /// the cost, parameters are fixed at target values, so only shared design
    /// variables couple subproblems). One-variable blocks are peeled in
    /// passes: a parameter whose model has exactly one variable not assigned
    /// by an earlier pass claims it, ties on the same variable defer both
    /// claimants. Whatever remains is grouped into connected components,
    /// each of which must itself be square.
    pub fn factorize(&self) -> Result<Vec<Block>, FactorizeError> {
        let var_index: BTreeMap<&str, usize> = self
            .design_variables
            .iter()
            .enumerate()
            .map(|(j, v)| (v.name.as_str(), j))
            .collect();

        // deps[i] = design-variable indices used by targeted parameter i's model.
        let mut deps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (i, p) in self.parameters.iter().enumerate() {
            if let Some(model) = p.model() {
                let fv = model.free_variables().map_err(|e| {
                    FactorizeError::InvalidFormulation(format!("model for `{}`: {e}", p.name))
                })?;
                let vars: BTreeSet<usize> = fv
                    .design
                    .iter()
                    .filter_map(|name| var_index.get(name.as_str()).copied())
                    .collect();
                deps.insert(i, vars);
            }
        }

        let mut blocks: Vec<Block> = Vec::new();
        let mut assigned_params: BTreeSet<usize> = BTreeSet::new();
        let mut assigned_vars: BTreeSet<usize> = BTreeSet::new();

        loop {
            // Claims are judged against assignments from earlier passes only,
            // so peels within one pass never depend on each other.
            let mut claims: Vec<(usize, usize)> = Vec::new();
            for (&i, vars) in &deps {
                if assigned_params.contains(&i) {
                    continue;
                }
                let unassigned: Vec<usize> = vars
                    .iter()
                    .copied()
                    .filter(|j| !assigned_vars.contains(j))
                    .collect();
                if let [j] = unassigned[..] {
                    claims.push((i, j));
                }
            }
            let mut claim_count: BTreeMap<usize, usize> = BTreeMap::new();
            for &(_, j) in &claims {
                *claim_count.entry(j).or_insert(0) += 1;
            }
            claims.retain(|&(_, j)| claim_count[&j] == 1);
            if claims.is_empty() {
                break;
            }
            for (i, j) in claims {
                blocks.push(Block {
                    parameter_indices: BTreeSet::from([i]),
                    variable_indices: BTreeSet::from([j]),
                    solve_order: blocks.len(),
                });
                assigned_params.insert(i);
                assigned_vars.insert(j);
            }
        }

        // Remainder: connected components of the bipartite graph restricted
        // to unassigned parameters and variables.
        let remaining_params: Vec<usize> = deps
            .keys()
            .copied()
            .filter(|i| !assigned_params.contains(i))
            .collect();
        let remaining_vars: Vec<usize> = (0..self.design_variables.len())
            .filter(|j| !assigned_vars.contains(j))
            .collect();

        let mut param_component: BTreeMap<usize, usize> = BTreeMap::new();
        let mut var_component: BTreeMap<usize, usize> = BTreeMap::new();
        let mut components: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();

        for &start in &remaining_params {
            if param_component.contains_key(&start) {
                continue;
            }
            let id = components.len();
            components.push((BTreeSet::new(), BTreeSet::new()));
            let mut queue = vec![start];
            param_component.insert(start, id);
            while let Some(i) = queue.pop() {
                components[id].0.insert(i);
                for &j in deps[&i].iter().filter(|j| !assigned_vars.contains(j)) {
                    if var_component.insert(j, id).is_none() {
                        components[id].1.insert(j);
                        for &i2 in remaining_params
                            .iter()
                            .filter(|&&i2| {
                                deps[&i2].contains(&j) && !param_component.contains_key(&i2)
                            })
                            .collect::<Vec<_>>()
                        {
                            param_component.insert(i2, id);
                            queue.push(i2);
                        }
                    }
                }
            }
        }
        // Variables untouched by any remaining model form their own
        // (unsolvable) components so the error names them.
        for &j in &remaining_vars {
            if !var_component.contains_key(&j) {
                components.push((BTreeSet::new(), BTreeSet::from([j])));
            }
        }

        for (params, vars) in components {
            if params.len() != vars.len() {
                return Err(FactorizeError::Unsolvable {
                    parameters: params
                        .iter()
                        .map(|&i| self.parameters[i].name.clone())
                        .collect(),
                    variables: vars
                        .iter()
                        .map(|&j| self.design_variables[j].name.clone())
                        .collect(),
                });
            }
            blocks.push(Block {
                parameter_indices: params,
                variable_indices: vars,
                solve_order: blocks.len(),
            });
        }

        Ok(blocks)
    }

    /// Extends `y` with every derived parameter, computed in dependency
    /// order. Existing derived entries are overwritten, which makes the
    /// operation idempotent.
    pub fn resolve_derived(&self, y: &ParameterVector) -> Result<ParameterVector, DerivedError> {
        let order = self.derived_order().map_err(DerivedError::Cycle)?;
        let mut out = y.clone();
        let empty_design = BTreeMap::new();
        for i in order {
            let p = &self.parameters[i];
            let derivation = p.derivation().expect("derived_order yields derived only");
            let value = derivation
                .evaluate(&Environment::new(&empty_design, &out))
                .map_err(|source| DerivedError::Eval {
                    parameter: p.name.clone(),
                    source,
                })?;
            out.insert(p.name.clone(), value);
        }
        Ok(out)
    }

    /// Topological order of derived parameters, or the cycle members.
    fn derived_order(&self) -> Result<Vec<usize>, Vec<String>> {
        let derived: Vec<usize> = (0..self.parameters.len())
            .filter(|&i| self.parameters[i].is_derived())
            .collect();
        let name_to_idx: BTreeMap<&str, usize> = derived
            .iter()
            .map(|&i| (self.parameters[i].name.as_str(), i))
            .collect();

        // needs[i] = derived parameters i's derivation references.
        let mut needs: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &i in &derived {
            let refs = self.parameters[i]
                .derivation()
                .expect("filtered to derived")
                .referenced_names();
            let v: BTreeSet<usize> = refs
                .iter()
                .filter_map(|n| name_to_idx.get(n.as_str()).copied())
                .collect();
            needs.insert(i, v);
        }

        let mut order = Vec::new();
        let mut placed: BTreeSet<usize> = BTreeSet::new();
        while order.len() < derived.len() {
            let mut progressed = false;
            for &i in &derived {
                if !placed.contains(&i) && needs[&i].iter().all(|d| placed.contains(d)) {
                    order.push(i);
                    placed.insert(i);
                    progressed = true;
                }
            }
            if !progressed {
                let cycle: Vec<String> = derived
                    .iter()
                    .filter(|i| !placed.contains(i))
                    .map(|&i| self.parameters[i].name.clone())
                    .collect();
                return Err(cycle);
            }
        }
        Ok(order)
    }
}
