//! CSV and SVG emission.
//!
//! CSV files are UTF-8 with a header row, `.` decimal separator and full
//! float precision (17 significant digits), so identical runs produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use qualdyn::{QualState, Trajectory};

use crate::CliError;

/// Full-precision float formatting (17 significant digits).
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Trajectory rows: step, alphaA, alphaB, thetaA, thetaB, utility.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(traj.thresholds.len());
    for (i, pair) in traj.thresholds.iter().enumerate() {
        let state = traj.states[i];
        rows.push(vec![
            i.to_string(),
            fmt(state.alpha_a),
            fmt(state.alpha_b),
            fmt(pair.theta_a),
            fmt(pair.theta_b),
            fmt(traj.utilities[i]),
        ]);
    }
    rows
}

/// Hand-rolled SVG phase portrait over the unit square: balanced curves,
/// trajectories with step markers, equilibria as stars.
pub struct PhasePortrait {
    pub title: String,
    /// (alpha_b, psi_a) samples: the curve alpha_a = psi_a(alpha_b).
    pub curve_a: Vec<(f64, f64)>,
    /// (alpha_a, psi_b) samples: the curve alpha_b = psi_b(alpha_a).
    pub curve_b: Vec<(f64, f64)>,
    pub trajectories: Vec<Vec<QualState>>,
    pub equilibria: Vec<QualState>,
}

const SIZE: f64 = 640.0;
const MARGIN: f64 = 60.0;

fn px(alpha_a: f64, alpha_b: f64) -> (f64, f64) {
    let span = SIZE - 2.0 * MARGIN;
    (
        MARGIN + alpha_a.clamp(0.0, 1.0) * span,
        SIZE - MARGIN - alpha_b.clamp(0.0, 1.0) * span,
    )
}

fn polyline(points: impl IntoIterator<Item = (f64, f64)>, style: &str) -> String {
    let coords: Vec<String> = points
        .into_iter()
        .map(|(aa, ab)| {
            let (x, y) = px(aa, ab);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        "  <polyline points=\"{}\" fill=\"none\" {style}/>\n",
        coords.join(" ")
    )
}

impl PhasePortrait {
    pub fn render(&self) -> String {
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
        ));
        svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        // axes box and labels
        let (x0, y0) = px(0.0, 0.0);
        let (x1, y1) = px(1.0, 1.0);
        svg.push_str(&format!(
            "  <rect x=\"{x0:.1}\" y=\"{y1:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
            x1 - x0,
            y0 - y1
        ));
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let (tx, _) = px(tick, 0.0);
            let (_, ty) = px(0.0, tick);
            svg.push_str(&format!(
                "  <text x=\"{tx:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{tick}</text>\n",
                y0 + 18.0
            ));
            svg.push_str(&format!(
                "  <text x=\"{:.1}\" y=\"{ty:.1}\" font-size=\"12\" text-anchor=\"end\">{tick}</text>\n",
                x0 - 8.0
            ));
        }
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">group-a rate</text>\n",
            SIZE / 2.0,
            SIZE - 12.0
        ));
        svg.push_str(&format!(
            "  <text x=\"16\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">group-b rate</text>\n",
            SIZE / 2.0,
            SIZE / 2.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            SIZE / 2.0,
            self.title
        ));
        // balanced curves: alpha_a = psi_a(alpha_b) in blue, alpha_b = psi_b(alpha_a) in red
        svg.push_str(&polyline(
            self.curve_a.iter().map(|&(ab, aa)| (aa, ab)),
            "stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"",
        ));
        svg.push_str(&polyline(
            self.curve_b.iter().map(|&(aa, ab)| (aa, ab)),
            "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"",
        ));
        for traj in &self.trajectories {
            svg.push_str(&polyline(
                traj.iter().map(|s| (s.alpha_a, s.alpha_b)),
                "stroke=\"#555\" stroke-width=\"1\"",
            ));
            if let Some(start) = traj.first() {
                let (x, y) = px(start.alpha_a, start.alpha_b);
                svg.push_str(&format!(
                    "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"#555\"/>\n"
                ));
            }
        }
        for eq in &self.equilibria {
            let (x, y) = px(eq.alpha_a, eq.alpha_b);
            svg.push_str(&format!(
                "  <path d=\"M {x:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} Z\" fill=\"#111\"/>\n",
                y - 7.0,
                x + 6.5,
                y + 4.5,
                x - 6.5,
                y + 4.5,
                x + 4.0,
                y - 2.0,
                x - 4.0,
                y - 2.0,
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        file.write_all(self.render().as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
    }
}

/// Scatter of equilibrium points (used for sweep outputs).
pub fn scatter_svg(
    path: &Path,
    title: &str,
    points: &[(QualState, bool)],
) -> Result<(), CliError> {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    svg.push_str(&format!(
        "  <rect x=\"{x0:.1}\" y=\"{y1:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
        x1 - x0,
        y0 - y1
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        SIZE / 2.0
    ));
    for (i, (state, oscillating)) in points.iter().enumerate() {
        let (x, y) = px(state.alpha_a, state.alpha_b);
        let color = if *oscillating { "#d62728" } else { "#1f77b4" };
        svg.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{color}\" fill-opacity=\"0.75\"/>\n"
        ));
        if i > 0 {
            let (px_prev, py_prev) = px(points[i - 1].0.alpha_a, points[i - 1].0.alpha_b);
            svg.push_str(&format!(
                "  <line x1=\"{px_prev:.2}\" y1=\"{py_prev:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"#bbb\" stroke-width=\"0.7\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
