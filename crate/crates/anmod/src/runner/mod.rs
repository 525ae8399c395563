//! Config-driven orchestration: load a run configuration, execute the
//! optimization loop, and persist history, summaries, sweeps, and reports.
//!
//! A run configuration is a TOML file carrying the problem formulation
//! (design variables, parameters with their proportionality models), the
//! backend selection, and the optimizer settings. Model expressions appear
//! verbatim as strings. Every run writes three files into its output
//! directory:
//!
//! - `history.jsonl` — one JSON object per iteration with keys
//!   `k, x, y, y_pred, cost, status`;
//! - `summary.txt` — final status, iterations used, and relative errors;
//! - `config_snapshot.toml` — the effective configuration (overrides
//!   applied), sufficient to replay the run byte-for-byte.

mod batch;
mod history;
mod report;
mod sweep;

pub use batch::{execute_batch, sample_design, BatchOutcome, BatchRunSummary};
pub use history::{
    final_relative_errors, history_lines, read_history, write_history, HistoryError, HistoryLine,
};
pub use report::{execute_report, ReportError, ReportOutcome};
pub use sweep::{execute_sweep, fit_power_law, render_fits, PowerLawFit, SweepOutcome};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::backends::{
    CapacitanceMode, CapacitanceSurrogate, Evaluator, PerfectModelEvaluator,
    QubitResonatorSurrogate, TwoQubitSurrogate,
};
use crate::engine::{self, RunHistory, RunStatus, UpdateSettings};
use crate::problem::{DesignPoint, DesignVariable, Parameter, ProblemFormulation};

/// Backends a configuration may name.
pub const BACKEND_NAMES: [&str; 5] = [
    "capacitance",
    "perfect_model",
    "qubit_resonator",
    "t1_limit",
    "two_qubit",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    /// One violation per line; printing this is the validation report.
    #[error("invalid configuration:\n{report}")]
    Invalid { report: String },
}

impl ConfigError {
    fn invalid(violations: Vec<String>) -> Self {
        ConfigError::Invalid {
            report: violations
                .iter()
                .map(|v| format!("  - {v}"))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

/// A whole run configuration file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run name; also the default output directory stem (`runs/<name>`).
    pub name: String,
    /// Master seed; per-iteration and per-batch-run seeds derive from it.
    #[serde(default, with = "seed_codec")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub backend: BackendConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub design_variables: Vec<VariableConfig>,
    pub parameters: Vec<ParameterConfig>,
    /// Bounds-uniform initial-condition sampling for `batch`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// One of [`BACKEND_NAMES`].
    pub name: String,
    /// Fidelity: emulated mesh-refinement pass count.
    #[serde(default = "default_passes")]
    pub passes: u32,
    /// Extraction noise on/off (seeded; off means bit-reproducible values).
    #[serde(default)]
    pub noise: bool,
    /// Surrogate cross-terms on/off. Off makes each truth a pure power law.
    #[serde(default = "default_true")]
    pub cross_terms: bool,
    /// `perfect_model` only: design point where the truth is calibrated to
    /// hit every target exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<BTreeMap<String, f64>>,
}

/// Seeds use the whole u64 range (batch runs derive theirs by hashing), but
/// TOML integers stop at i64::MAX, so larger seeds travel as decimal strings.
mod seed_codec {
    pub fn serialize<S: serde::Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *v <= i64::MAX as u64 {
            s.serialize_i64(*v as i64)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct SeedVisitor;
        impl serde::de::Visitor<'_> for SeedVisitor {
            type Value = u64;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a non-negative integer or a decimal string")
            }

            fn visit_u64<E>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("seed must be non-negative"))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<u64, E> {
                v.parse()
                    .map_err(|_| E::custom(format!("not a u64 seed: `{v}`")))
            }
        }
        d.deserialize_any(SeedVisitor)
    }
}

fn default_passes() -> u32 {
    8
}

fn default_true() -> bool {
    true
}

/// Optimizer settings; every field falls back to the engine default.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjustment_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cost_evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_factor: Option<f64>,
}

impl OptimizerConfig {
    pub fn settings(&self) -> UpdateSettings {
        let d = UpdateSettings::default();
        UpdateSettings {
            adjustment_rate: self.adjustment_rate.unwrap_or(d.adjustment_rate),
            cost_tolerance: self.cost_tolerance.unwrap_or(d.cost_tolerance),
            max_cost_evaluations: self.max_cost_evaluations.unwrap_or(d.max_cost_evaluations),
            convergence_tolerance: self
                .convergence_tolerance
                .unwrap_or(d.convergence_tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            divergence_factor: self.divergence_factor.unwrap_or(d.divergence_factor),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// One parameter declaration. Exactly one of the three roles must be chosen:
/// `target` + `model` (targeted), `derivation` (derived), or
/// `untargeted = true` (reported only).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub untargeted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ParameterConfig {
    fn build(&self) -> Result<Parameter, String> {
        let roles = [
            self.target.is_some() || self.model.is_some(),
            self.derivation.is_some(),
            self.untargeted,
        ];
        if roles.iter().filter(|r| **r).count() != 1 {
            return Err(format!(
                "parameter {} must have exactly one role: target+model, derivation, or untargeted = true",
                self.name
            ));
        }
        let parameter = if self.untargeted {
            Parameter::untargeted(&self.name)
        } else if let Some(derivation) = &self.derivation {
            Parameter::derived(&self.name, derivation)
                .map_err(|e| format!("parameter {}: {e}", self.name))?
        } else {
            match (self.target, &self.model) {
                (Some(target), Some(model)) => Parameter::targeted(&self.name, target, model)
                    .map_err(|e| format!("parameter {}: {e}", self.name))?,
                (Some(_), None) => {
                    return Err(format!("parameter {} has a target but no model", self.name))
                }
                _ => return Err(format!("parameter {} has a model but no target", self.name)),
            }
        };
        Ok(match &self.unit {
            Some(unit) => parameter.with_unit(unit),
            None => parameter,
        })
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Default run count for `batch` when the CLI does not pass one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Per-variable sampling bounds; variables not listed sample within
    /// their own hard bounds.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, (f64, f64)>,
}

/// CLI overrides folded into the config before anything runs, so the
/// snapshot always records what actually executed.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub adjustment_rate: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Everything needed to execute: validated formulation, settings, backend.
pub struct PreparedRun {
    pub formulation: ProblemFormulation,
    pub settings: UpdateSettings,
    pub evaluator: Box<dyn Evaluator>,
    pub passes: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn apply(&mut self, overrides: &RunOverrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(max_iterations) = overrides.max_iterations {
            self.optimizer.max_iterations = Some(max_iterations);
        }
        if let Some(adjustment_rate) = overrides.adjustment_rate {
            self.optimizer.adjustment_rate = Some(adjustment_rate);
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = Some(dir.clone());
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }

    /// Builds the formulation from the declared variables and parameters.
    /// Expression parse problems come back as one violation per parameter.
    pub fn build_formulation(&self) -> Result<ProblemFormulation, Vec<String>> {
        let mut violations = Vec::new();
        let mut parameters = Vec::new();
        for p in &self.parameters {
            match p.build() {
                Ok(parameter) => parameters.push(parameter),
                Err(v) => violations.push(v),
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        let variables = self
            .design_variables
            .iter()
            .map(|v| {
                let variable = DesignVariable::new(&v.name, v.value, v.lower, v.upper);
                match &v.unit {
                    Some(unit) => variable.with_unit(unit),
                    None => variable,
                }
            })
            .collect();
        Ok(ProblemFormulation::new(&self.name, variables, parameters))
    }

    /// The effective bounds-uniform sampling box: every design variable in
    /// name order, bounds overridden by `[sampling.bounds]` where given.
    pub fn sampling_box(&self) -> BTreeMap<String, (f64, f64)> {
        let overrides = self.sampling.as_ref().map(|s| &s.bounds);
        self.design_variables
            .iter()
            .map(|v| {
                let bounds = overrides
                    .and_then(|b| b.get(&v.name).copied())
                    .unwrap_or((v.lower, v.upper));
                (v.name.clone(), bounds)
            })
            .collect()
    }

    /// Validates everything and constructs the executable pieces. The error
    /// carries the full validation report (all violations, not just the
    /// first).
    pub fn prepare(&self) -> Result<PreparedRun, ConfigError> {
        let mut violations = Vec::new();

        let formulation = match self.build_formulation() {
            Ok(pf) => {
                let report = pf.validate();
                if !report.is_ok() {
                    violations.push(report.to_string());
                }
                Some(pf)
            }
            Err(mut errs) => {
                violations.append(&mut errs);
                None
            }
        };

        let settings = self.optimizer.settings();
        violations.extend(settings.validate());

        if self.backend.passes < 1 {
            violations.push("backend passes must be >= 1".to_string());
        }
        if let Some(sampling) = &self.sampling {
            for (name, (lo, hi)) in &sampling.bounds {
                match self.design_variables.iter().find(|v| v.name == *name) {
                    None => violations.push(format!(
                        "sampling bounds name an undeclared variable `{name}`"
                    )),
                    Some(v) => {
                        if !(lo <= hi) {
                            violations.push(format!(
                                "sampling bounds for {name} are inverted: [{lo}, {hi}]"
                            ));
                        }
                        if *lo < v.lower || *hi > v.upper {
                            violations.push(format!(
                                "sampling bounds for {name} [{lo}, {hi}] exceed the variable bounds [{}, {}]",
                                v.lower, v.upper
                            ));
                        }
                    }
                }
            }
        }

        let evaluator = match &formulation {
            Some(pf) if violations.is_empty() => match self.build_evaluator(pf) {
                Ok(evaluator) => Some(evaluator),
                Err(v) => {
                    violations.push(v);
                    None
                }
            },
            _ => None,
        };

        match (formulation, evaluator) {
            (Some(formulation), Some(evaluator)) if violations.is_empty() => Ok(PreparedRun {
                formulation,
                settings,
                evaluator,
                passes: self.backend.passes,
                seed: self.seed,
                output_dir: self.output_dir(),
            }),
            _ => Err(ConfigError::invalid(violations)),
        }
    }

    fn build_evaluator(&self, pf: &ProblemFormulation) -> Result<Box<dyn Evaluator>, String> {
        let b = &self.backend;
        match b.name.as_str() {
            "qubit_resonator" => Ok(Box::new(QubitResonatorSurrogate::new(
                b.cross_terms,
                b.noise,
            ))),
            "two_qubit" => Ok(Box::new(TwoQubitSurrogate::new(b.cross_terms, b.noise))),
            "capacitance" => Ok(Box::new(CapacitanceSurrogate::new(
                CapacitanceMode::Coupling,
                b.cross_terms,
                b.noise,
            ))),
            "t1_limit" => Ok(Box::new(CapacitanceSurrogate::new(
                CapacitanceMode::T1,
                b.cross_terms,
                b.noise,
            ))),
            "perfect_model" => {
                let x_star = b
                    .x_star
                    .as_ref()
                    .ok_or("backend perfect_model needs an x_star design point")?;
                let x_star: DesignPoint = x_star.clone();
                Ok(Box::new(PerfectModelEvaluator::calibrated(pf, &x_star)?))
            }
            other => Err(format!(
                "unknown backend `{other}`; available: {}",
                BACKEND_NAMES.join(", ")
            )),
        }
    }

    /// Renders the effective configuration back to TOML.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }
}

/// Output of one executed run: where it wrote and how it ended.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub history: RunHistory,
}

impl RunOutcome {
    /// Process exit code for the run's final status.
    pub fn exit_code(&self) -> i32 {
        status_exit_code(self.history.status)
    }
}

pub fn status_exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Success => 0,
        RunStatus::Diverged => 2,
        RunStatus::MaxIter => 3,
        RunStatus::EvaluatorError => 4,
    }
}

/// Executes one configured run and writes `history.jsonl`, `summary.txt`,
/// and `config_snapshot.toml` into the output directory.
pub fn execute_run(config: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let prepared = config.prepare()?;
    let history = engine::run(
        &prepared.formulation,
        prepared.evaluator.as_ref(),
        prepared.passes,
        &prepared.settings,
        prepared.seed,
    )
    .map_err(|report| ConfigError::Invalid { report })?;

    let dir = prepared.output_dir;
    std::fs::create_dir_all(&dir).map_err(|source| ConfigError::Io {
        path: dir.clone(),
        source,
    })?;
    let write = |name: &str, text: &str| -> Result<(), ConfigError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| ConfigError::Io { path, source })
    };

    write_history(&dir.join("history.jsonl"), &history).map_err(|source| ConfigError::Io {
        path: dir.join("history.jsonl"),
        source,
    })?;
    write(
        "summary.txt",
        &history::render_summary(config, &prepared.formulation, &history),
    )?;
    write("config_snapshot.toml", &config.snapshot())?;

    Ok(RunOutcome { dir, history })
}
