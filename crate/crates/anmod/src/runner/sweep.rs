//! Sweep mode: no targets, no optimization. One design variable walks an
//! explicit value list while the rest stay at their declared values, the
//! backend is evaluated at each point, and every reported parameter gets a
//! power-law fit y = a·x^b (least squares on log-log data). Comparing fitted
//! exponents against the declared models is how a proportionality model is
//! vetted before it is trusted in an optimization.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::engine::derive_seed;
use crate::problem::ParameterVector;

use super::{ConfigError, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    /// RMS residual of ln y around the fitted line.
    pub residual: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub variable: String,
    /// Accepted points: (swept value, evaluated parameters).
    pub rows: Vec<(f64, ParameterVector)>,
    /// One note per rejected value (out of bounds, evaluator failure).
    pub notes: Vec<String>,
    /// Per-parameter fit or the reason there is none, sorted by name.
    pub fits: Vec<(String, Result<PowerLawFit, String>)>,
}

impl SweepOutcome {
    pub fn fit(&self, parameter: &str) -> Option<&PowerLawFit> {
        self.fits
            .iter()
            .find(|(name, _)| name == parameter)
            .and_then(|(_, fit)| fit.as_ref().ok())
    }
}

/// Least-squares fit of y = a·x^b on log-log axes. Only strictly positive
/// finite points enter the fit; at least two with distinct x must remain.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, String> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(format!(
            "needs at least two strictly positive points, got {}",
            logs.len()
        ));
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err("all x values coincide; exponent is undetermined".to_string());
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let b = sxy / sxx;
    let ln_a = mean_y - b * mean_x;
    let residual = (logs
        .iter()
        .map(|(x, y)| (y - (ln_a + b * x)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        a: ln_a.exp(),
        b,
        residual,
    })
}

/// Evaluates the backend along `values` of `variable` and fits a power law
/// per reported parameter. Writes `sweep_<variable>.csv` and
/// `sweep_<variable>_fit.txt` into the output directory.
pub fn execute_sweep(
    config: &RunConfig,
    variable: &str,
    values: &[f64],
) -> Result<SweepOutcome, ConfigError> {
    let prepared = config.prepare()?;
    let Some(swept) = prepared.formulation.variable(variable) else {
        let declared: Vec<&str> = prepared
            .formulation
            .design_variables()
            .iter()
            .map(|v| v.name.as_str())
            .collect();
        return Err(ConfigError::invalid(vec![format!(
            "unknown sweep variable `{variable}`; declared: {}",
            declared.join(", ")
        )]));
    };
    if values.is_empty() {
        return Err(ConfigError::invalid(vec![
            "no sweep values given".to_string()
        ]));
    }

    let base = prepared.formulation.initial_design();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (i, &value) in values.iter().enumerate() {
        if value < swept.lower_bound || value > swept.upper_bound {
            notes.push(format!(
                "value {value} rejected: outside bounds [{}, {}]",
                swept.lower_bound, swept.upper_bound
            ));
            continue;
        }
        let mut x = base.clone();
        x.insert(variable.to_string(), value);
        match prepared
            .evaluator
            .evaluate(&x, prepared.passes, derive_seed(prepared.seed, i as u64))
        {
            Ok(y) => rows.push((value, y)),
            Err(e) => notes.push(format!("value {value} rejected: {e}")),
        }
    }
    if rows.len() < 2 {
        let mut report = vec![format!(
            "sweep kept {} usable points; a fit needs at least 2",
            rows.len()
        )];
        report.extend(notes);
        return Err(ConfigError::invalid(report));
    }

    let parameter_names: BTreeSet<String> =
        rows.iter().flat_map(|(_, y)| y.keys().cloned()).collect();
    let fits: Vec<(String, Result<PowerLawFit, String>)> = parameter_names
        .iter()
        .map(|name| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|(x, y)| y.get(name).map(|v| (*x, *v)))
                .collect();
            (name.clone(), fit_power_law(&points))
        })
        .collect();

    let dir = prepared.output_dir;
    std::fs::create_dir_all(&dir).map_err(|source| ConfigError::Io {
        path: dir.clone(),
        source,
    })?;

    let mut csv = String::new();
    csv.push_str(variable);
    for name in &parameter_names {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for (x, y) in &rows {
        csv.push_str(&format!("{x}"));
        for name in &parameter_names {
            csv.push(',');
            csv.push_str(&y.get(name).map(|v| format!("{v}")).unwrap_or_default());
        }
        csv.push('\n');
    }
    let csv_path = dir.join(format!("sweep_{variable}.csv"));
    std::fs::write(&csv_path, csv).map_err(|source| ConfigError::Io {
        path: csv_path,
        source,
    })?;

    let outcome = SweepOutcome {
        dir: dir.clone(),
        variable: variable.to_string(),
        rows,
        notes,
        fits,
    };
    let fit_path = dir.join(format!("sweep_{variable}_fit.txt"));
    std::fs::write(&fit_path, render_fits(&outcome)).map_err(|source| ConfigError::Io {
        path: fit_path,
        source,
    })?;
    Ok(outcome)
}

/// Human-readable fit block, also what `sweep_<variable>_fit.txt` holds.
pub fn render_fits(outcome: &SweepOutcome) -> String {
    let mut out = String::new();
    out.push_str(&format!("sweep variable: {}\n", outcome.variable));
    out.push_str(&format!(
        "points: {} accepted, {} rejected\n",
        outcome.rows.len(),
        outcome.notes.len()
    ));
    for note in &outcome.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out.push_str("fits (y = a * x^b):\n");
    for (name, fit) in &outcome.fits {
        match fit {
            Ok(f) => out.push_str(&format!(
                "  {name}: a = {:.6e}, b = {:+.6}, residual = {:.3e}\n",
                f.a, f.b, f.residual
            )),
            Err(reason) => out.push_str(&format!("  {name}: not fitted: {reason}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let points: Vec<(f64, f64)> = [1.0_f64, 2.0, 5.0, 10.0]
            .iter()
            .map(|&x| (x, 3.0 * x.powf(2.0)))
            .collect();
        let fit = fit_power_law(&points).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-12, "a = {}", fit.a);
        assert!((fit.b - 2.0).abs() < 1e-12, "b = {}", fit.b);
        assert!(fit.residual < 1e-12, "residual = {}", fit.residual);
    }

    #[test]
    fn constant_series_fits_zero_exponent() {
        let points = vec![(1.0, 4.2), (3.0, 4.2), (9.0, 4.2)];
        let fit = fit_power_law(&points).unwrap();
        assert_eq!(fit.b, 0.0);
        assert!((fit.a - 4.2).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_points_are_excluded_from_the_fit() {
        let points = vec![(1.0, 2.0), (2.0, 4.0), (3.0, -1.0), (0.0, 9.0)];
        let fit = fit_power_law(&points).unwrap();
        assert!((fit.b - 1.0).abs() < 1e-12, "b = {}", fit.b);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(fit_power_law(&[(1.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(-1.0, 2.0), (-2.0, 3.0)]).is_err());
    }

    #[test]
    fn noisy_fit_reports_its_residual() {
        let points = vec![(1.0, 1.0), (2.0, 2.2), (4.0, 3.9), (8.0, 8.3)];
        let fit = fit_power_law(&points).unwrap();
        assert!(fit.residual > 0.0);
        assert!((fit.b - 1.0).abs() < 0.1, "b = {}", fit.b);
    }
}
