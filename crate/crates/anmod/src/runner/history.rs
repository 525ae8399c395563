//! History persistence: JSON-lines on disk, one object per iteration.
//!
//! Field order is part of the file contract (`k, x, y, y_pred, cost,
//! status`), and every line carries the run's final status so a single line
//! read anywhere in the file tells how the run ended. Writes are
//! deterministic: maps are sorted by name and floats use the shortest
//! round-trip form, so identical runs produce byte-identical files.

use std::path::Path;

use crate::engine::{RunHistory, RunStatus};
use crate::problem::{DesignPoint, ParameterVector, ProblemFormulation};

use super::RunConfig;

/// One iteration as stored on disk.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryLine {
    pub k: usize,
    pub x: DesignPoint,
    /// Evaluated parameters, derived included.
    pub y: ParameterVector,
    /// Model prediction for the next iteration; absent on the terminal line.
    pub y_pred: Option<ParameterVector>,
    pub cost: Option<f64>,
    /// Final status of the whole run, repeated on every line.
    pub status: RunStatus,
}

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("cannot read history: {0}")]
    Io(#[from] std::io::Error),
    #[error("history line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
}

/// Projects an in-memory run onto its file form.
pub fn history_lines(history: &RunHistory) -> Vec<HistoryLine> {
    history
        .records
        .iter()
        .map(|r| HistoryLine {
            k: r.k,
            x: r.x.clone(),
            y: r.y.clone(),
            y_pred: r.predicted_y.clone(),
            cost: r.cost,
            status: history.status,
        })
        .collect()
}

pub fn write_history(path: &Path, history: &RunHistory) -> std::io::Result<()> {
    let mut text = String::new();
    for line in history_lines(history) {
        text.push_str(&serde_json::to_string(&line).map_err(std::io::Error::other)?);
        text.push('\n');
    }
    std::fs::write(path, text)
}

/// Reads a JSON-lines history back; a malformed line is reported by its
/// 1-based line number.
pub fn read_history(path: &Path) -> Result<Vec<HistoryLine>, HistoryError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = serde_json::from_str::<HistoryLine>(raw).map_err(|e| HistoryError::Corrupt {
            line: i + 1,
            detail: e.to_string(),
        })?;
        lines.push(line);
    }
    Ok(lines)
}

/// Signed relative errors (y/target − 1) of the last evaluated iteration,
/// in declaration order. Empty when the run never completed an evaluation.
pub fn final_relative_errors(pf: &ProblemFormulation, history: &RunHistory) -> Vec<(String, f64)> {
    let Some(last) = history.records.last() else {
        return Vec::new();
    };
    pf.parameters()
        .iter()
        .filter_map(|p| {
            p.target().map(|t| {
                let rel = last.y.get(&p.name).map(|y| y / t - 1.0).unwrap_or(f64::NAN);
                (p.name.clone(), rel)
            })
        })
        .collect()
}

pub(super) fn render_summary(
    config: &RunConfig,
    pf: &ProblemFormulation,
    history: &RunHistory,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("run: {}\n", config.name));
    out.push_str(&format!(
        "backend: {} (passes = {}, noise = {}, cross_terms = {})\n",
        config.backend.name,
        config.backend.passes,
        config.backend.noise,
        config.backend.cross_terms
    ));
    out.push_str(&format!("seed: {}\n", config.seed));
    out.push_str(&format!("status: {}\n", history.status));
    out.push_str(&format!(
        "iterations used: {}\n",
        history.records.len().saturating_sub(1)
    ));
    if let Some(message) = &history.message {
        out.push_str(&format!("message: {message}\n"));
    }
    let rels = final_relative_errors(pf, history);
    if rels.is_empty() {
        out.push_str("final relative errors: none (no completed evaluation)\n");
    } else {
        out.push_str("final relative errors:\n");
        for (name, rel) in rels {
            out.push_str(&format!("  {name}: {rel:+.6e}\n"));
        }
    }
    out
}
