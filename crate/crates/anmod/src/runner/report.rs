//! Convergence reports from a history file: relative-error and
//! design-variable CSVs plus one SVG line chart per tracked quantity, with
//! each target drawn as a dashed reference line. Targets and declaration
//! order come from the `config_snapshot.toml` written next to the history.

use std::path::{Path, PathBuf};

use super::history::{read_history, HistoryError, HistoryLine};
use super::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Builds every report file next to the history it describes.
pub fn execute_report(history_path: &Path) -> Result<ReportOutcome, ReportError> {
    let lines = read_history(history_path)?;
    if lines.is_empty() {
        return Err(ReportError::Invalid(format!(
            "history {} is empty; nothing to report",
            history_path.display()
        )));
    }
    let dir = history_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let snapshot_path = dir.join("config_snapshot.toml");
    if !snapshot_path.exists() {
        return Err(ReportError::Invalid(format!(
            "no config snapshot at {}; targets are unknown",
            snapshot_path.display()
        )));
    }
    let config = RunConfig::load(&snapshot_path)?;

    let targeted: Vec<(String, f64, Option<String>)> = config
        .parameters
        .iter()
        .filter_map(|p| p.target.map(|t| (p.name.clone(), t, p.unit.clone())))
        .collect();
    let variables: Vec<(String, Option<String>)> = config
        .design_variables
        .iter()
        .map(|v| (v.name.clone(), v.unit.clone()))
        .collect();

    let mut files = Vec::new();
    let write = |name: String, text: String| -> Result<PathBuf, ReportError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };

    files.push(write(
        "report_targets.csv".to_string(),
        target_errors_csv(&targeted, &lines),
    )?);
    files.push(write(
        "report_variables.csv".to_string(),
        variables_csv(&variables, &lines),
    )?);

    for (name, target, unit) in &targeted {
        let points: Vec<(f64, f64)> = lines
            .iter()
            .map(|l| (l.k as f64, l.y.get(name).copied().unwrap_or(f64::NAN)))
            .collect();
        let svg = line_chart(name, unit.as_deref(), &points, Some(*target));
        files.push(write(format!("param_{name}.svg"), svg)?);
    }
    for (name, unit) in &variables {
        let points: Vec<(f64, f64)> = lines
            .iter()
            .map(|l| (l.k as f64, l.x.get(name).copied().unwrap_or(f64::NAN)))
            .collect();
        let svg = line_chart(name, unit.as_deref(), &points, None);
        files.push(write(format!("var_{name}.svg"), svg)?);
    }

    Ok(ReportOutcome { dir, files })
}

fn target_errors_csv(targeted: &[(String, f64, Option<String>)], lines: &[HistoryLine]) -> String {
    let mut out = String::from("k");
    for (name, _, _) in targeted {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for line in lines {
        out.push_str(&format!("{}", line.k));
        for (name, target, _) in targeted {
            let rel = line
                .y
                .get(name)
                .map(|y| y / target - 1.0)
                .unwrap_or(f64::NAN);
            out.push_str(&format!(",{rel}"));
        }
        out.push('\n');
    }
    out
}

fn variables_csv(variables: &[(String, Option<String>)], lines: &[HistoryLine]) -> String {
    let mut out = String::from("k");
    for (name, _) in variables {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for line in lines {
        out.push_str(&format!("{}", line.k));
        for (name, _) in variables {
            let value = line.x.get(name).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(",{value}"));
        }
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 84.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 54.0;

/// One quantity against iteration number; `dashed` draws a horizontal
/// reference (the target).
fn line_chart(
    name: &str,
    unit: Option<&str>,
    points: &[(f64, f64)],
    dashed: Option<f64>,
) -> String {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(_, y)| y.is_finite())
        .collect();

    let (x_lo, x_hi) = pad_domain(
        points.first().map(|p| p.0).unwrap_or(0.0),
        points.last().map(|p| p.0).unwrap_or(1.0),
        0.0,
    );
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, y) in &finite {
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if let Some(t) = dashed {
        y_min = y_min.min(t);
        y_max = y_max.max(t);
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let (y_lo, y_hi) = pad_domain(y_min, y_max, 0.08);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let title = match unit {
        Some(unit) => format!("{name} [{unit}]"),
        None => name.to_string(),
    };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"26\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(&title)
    ));

    // Frame and ticks.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT:.1}\" y=\"{MARGIN_TOP:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#444\"/>\n"
    ));
    for i in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let py = sy(y);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            py + 4.0,
            format_tick(y)
        ));
    }
    let k_max = points.last().map(|p| p.0).unwrap_or(1.0);
    let step = ((k_max / 8.0).ceil() as usize).max(1);
    let mut k = 0.0;
    while k <= k_max + 1e-9 {
        let px = sx(k);
        svg.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 20.0,
            k as usize
        ));
        k += step as f64;
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    ));

    if let Some(t) = dashed {
        let py = sy(t);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\" text-anchor=\"end\">target</text>\n",
            MARGIN_LEFT + plot_w - 4.0,
            py - 5.0
        ));
    }

    if !finite.is_empty() {
        let path: Vec<String> = finite
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        for (x, y) in &finite {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
                sx(*x),
                sy(*y)
            ));
        }
    }

    svg.push_str("</svg>\n");
    svg
}

/// Expands a possibly degenerate [lo, hi] into a paintable range.
fn pad_domain(lo: f64, hi: f64, fraction: f64) -> (f64, f64) {
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * fraction;
    (lo - pad, hi + pad)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if !(1e-3..1e4).contains(&magnitude) {
        return format!("{v:.2e}");
    }
    let text = format!("{v:.4}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_draws_series_and_dashed_target() {
        let points = vec![(0.0, 6.5), (1.0, 6.1), (2.0, 6.01)];
        let svg = line_chart("f_res", Some("GHz"), &points, Some(6.0));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("f_res [GHz]"));
    }

    #[test]
    fn chart_without_target_has_no_dashed_line() {
        let svg = line_chart("l_res", None, &[(0.0, 7500.0), (1.0, 8100.0)], None);
        assert!(!svg.contains("stroke-dasharray"));
    }

    #[test]
    fn single_point_history_still_renders() {
        let svg = line_chart("chi", None, &[(0.0, 1e-3)], Some(1e-3));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn ticks_use_scientific_form_outside_the_plain_range() {
        assert_eq!(format_tick(0.0), "0");
        assert_eq!(format_tick(6.0), "6");
        assert_eq!(format_tick(0.25), "0.25");
        assert!(format_tick(1.0e-4).contains('e'));
        assert!(format_tick(2.0e5).contains('e'));
    }

    #[test]
    fn titles_are_xml_escaped() {
        assert_eq!(xml_escape("a < b & c"), "a &lt; b &amp; c");
    }
}
