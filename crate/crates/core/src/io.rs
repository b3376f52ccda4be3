//! CSV artifacts and log-log SVG plots.
//!
//! Every CSV is deterministic given its inputs; manifests carry a single
//! `# generated_unix=` line that is the only run-dependent content.

use std::fmt::Write as _;
use std::path::Path;

use crate::control::IterationRecord;
use crate::error::{Error, Result};
use crate::fields::{divergence, PressureField, VelocityField};
use crate::forward::{EnergyStep, StateTrajectory};
use crate::grid::{Grid, TimeGrid};
use crate::sweep::{Metric, SweepReport};

pub const TIMESTAMP_PREFIX: &str = "# generated_unix=";

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".to_string()
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Field dump: a `component,nx,ny,hx,hy` header, then per component one
/// descriptor row (array columns and rows) followed by one CSV row per grid
/// line. Velocity arrays include the wall-trace rows/columns.
pub fn field_csv(grid: &Grid, u: &VelocityField, p: Option<&PressureField>) -> String {
    let mut out = String::from("component,nx,ny,hx,hy\n");
    let (hx, hy) = (num(grid.hx()), num(grid.hy()));
    let mut block = |name: &str, a: ndarray::ArrayView2<'_, f64>| {
        let (ni, nj) = a.dim();
        let _ = writeln!(out, "{name},{ni},{nj},{hx},{hy}");
        for j in 0..nj {
            let row: Vec<String> = (0..ni).map(|i| num(a[[i, j]])).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
    };
    block("ux", u.ux());
    block("uy", u.uy());
    if let Some(p) = p {
        block("p", p.0.view());
    }
    out
}

/// One row per step of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub time: f64,
    pub residual: f64,
    pub max_divergence: f64,
}

pub fn step_rows(grid: &Grid, time: &TimeGrid, traj: &StateTrajectory) -> Vec<StepRow> {
    traj.residuals
        .iter()
        .enumerate()
        .map(|(k, &residual)| StepRow {
            step: k + 1,
            time: time.time(k + 1),
            residual,
            max_divergence: divergence(grid, &traj.velocity[k + 1])
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs())),
        })
        .collect()
}

/// Run manifest: `key,value` pairs followed by the per-step table.
pub fn manifest_csv(entries: &[(String, String)], steps: &[StepRow], timestamp: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(t) = timestamp {
        let _ = writeln!(out, "{TIMESTAMP_PREFIX}{t}");
    }
    out.push_str("key,value\n");
    for (k, v) in entries {
        let _ = writeln!(out, "{},{}", quote(k), quote(v));
    }
    if !steps.is_empty() {
        out.push_str("\nstep,time,residual,max_divergence\n");
        for s in steps {
            let _ = writeln!(out, "{},{},{},{}", s.step, num(s.time), num(s.residual), num(s.max_divergence));
        }
    }
    out
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iter,J,tracking,regularization,stationarity,step,backtracks\n");
    for h in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            h.iter,
            num(h.cost),
            num(h.tracking),
            num(h.regularization),
            num(h.stationarity),
            num(h.step),
            h.backtracks
        );
    }
    out
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("alpha");
    for m in Metric::ALL {
        let _ = write!(out, ",{}", m.name());
    }
    out.push_str(",cost_alpha,cost_reference,iterations,stationarity,converged,failure\n");
    for r in &report.rows {
        let _ = write!(out, "{}", num(r.alpha));
        for m in Metric::ALL {
            let _ = write!(out, ",{}", num(r.metric(m)));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{}",
            num(r.cost_alpha),
            num(r.cost_reference),
            r.iterations,
            num(r.stationarity),
            r.converged,
            quote(r.failure.as_deref().unwrap_or(""))
        );
    }
    out
}

pub fn energy_csv(rows: &[(usize, EnergyStep)]) -> String {
    let mut out = String::from("sample,step,kinetic_old,kinetic_new,dissipation,friction,balance,relative_slack\n");
    for (sample, e) in rows {
        let _ = writeln!(
            out,
            "{sample},{},{},{},{},{},{},{}",
            e.step,
            num(e.kinetic_old),
            num(e.kinetic_new),
            num(e.dissipation),
            num(e.friction),
            num(e.balance()),
            num(e.relative_slack())
        );
    }
    out
}

/// Standalone SVG with one log-log series, decade grid lines and the fitted
/// slope in the title line.
pub fn loglog_svg(title: &str, x: &[f64], y: &[f64], slope: Option<f64>) -> String {
    let (w, h) = (560.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 50.0, 50.0);
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.log10(), b.log10()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let slope_text = slope.map_or("slope: n/a".to_string(), |s| format!("slope {s:.3}"));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} ({})</text>"#,
        w / 2.0,
        xml_escape(title),
        slope_text
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let fx = |v: f64| v.floor();
    let cx = |v: f64| v.ceil();
    let (mut x0, mut x1) = (fx(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)), cx(pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)));
    let (mut y0, mut y1) = (fx(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)), cx(pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)));
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let sx = |v: f64| ml + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| mt + (y1 - v) / (y1 - y0) * ph;
    let _ = writeln!(out, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let mut d = x0;
    while d <= x1 + 1e-9 {
        let _ = writeln!(
            out,
            r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">1e{4}</text>"##,
            sx(d),
            mt,
            mt + ph,
            mt + ph + 18.0,
            d as i64
        );
        d += 1.0;
    }
    let mut d = y0;
    while d <= y1 + 1e-9 {
        let _ = writeln!(
            out,
            r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#ddd"/><text x="{3}" y="{0:.2}" text-anchor="end" dominant-baseline="middle">1e{4}</text>"##,
            sy(d),
            ml,
            ml + pw,
            ml - 6.0,
            d as i64
        );
        d += 1.0;
    }
    let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, path.join(" "));
    for &(a, b) in &pts {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##, sx(a), sy(b));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">alpha</text>"#,
        ml + pw / 2.0,
        h - 12.0
    );
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_dump_shape() {
        let g = Grid::build((1.0, 1.0), (4, 4)).unwrap();
        let u = VelocityField::zeros(&g);
        let text = field_csv(&g, &u, Some(&PressureField::zeros(&g)));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "component,nx,ny,hx,hy");
        assert_eq!(lines[1], "ux,5,6,2.5e-1,2.5e-1");
        assert_eq!(lines.len(), 1 + (1 + 6) + (1 + 5) + (1 + 4));
    }

    #[test]
    fn svg_mentions_slope() {
        let svg = loglog_svg("state", &[10.0, 100.0], &[0.1, 0.01], Some(-1.0));
        assert!(svg.contains("slope -1.000"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn csv_quotes_commas() {
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("ab"), "ab");
    }
}
