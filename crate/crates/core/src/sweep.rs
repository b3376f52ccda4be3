//! Friction-parameter sweep: optimal controls under slip walls for a
//! ladder of `alpha`, each compared with the no-slip optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::AdjointTrajectory;
use crate::control::{optimize, optimize_from, AdmissibleSet, Control, ControlSpace, OptimizationResult, OptimizerOptions};
use crate::error::{Error, Result};
use crate::fields::{boundary_trace_norm, l2_norm, spacetime_from_sq, VelocityField};
use crate::forward::{BcSpec, ProblemConfig};

/// Half-decade ladder over three decades.
pub const DEFAULT_ALPHAS: [f64; 7] = [10.0, 31.6, 100.0, 316.0, 1000.0, 3160.0, 10000.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub alphas: Vec<f64>,
    /// Start each slip optimization from the previous optimum. Forces a
    /// sequential sweep.
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            alphas: DEFAULT_ALPHAS.to_vec(),
            warm_start: true,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self, bc: &BcSpec) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::config("sweep.alphas", "at least one alpha is required"));
        }
        if self.alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("sweep.alphas", "must be strictly increasing"));
        }
        for &a in &self.alphas {
            bc.with_alpha(a).map_err(|_| {
                Error::config(
                    "sweep.alphas",
                    format!("every alpha must exceed ||b||_inf + 1 = {}, got {a}", bc.data().sup_norm() + 1.0),
                )
            })?;
        }
        Ok(())
    }
}

/// Columns of a sweep row that are expected to vanish as `alpha` grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ControlError,
    StateError,
    StateTrace,
    AdjointError,
    AdjointTrace,
    CostGap,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::ControlError,
        Metric::StateError,
        Metric::StateTrace,
        Metric::AdjointError,
        Metric::AdjointTrace,
        Metric::CostGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ControlError => "control_error",
            Metric::StateError => "state_error",
            Metric::StateTrace => "sqrt_alpha_state_trace",
            Metric::AdjointError => "adjoint_error",
            Metric::AdjointTrace => "sqrt_alpha_adjoint_trace",
            Metric::CostGap => "cost_gap",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::ControlError => "||f_a - f||",
            Metric::StateError => "||u_a - u||",
            Metric::StateTrace => "sqrt(a) ||(u_a - b)_tau||",
            Metric::AdjointError => "||phi_a - phi||",
            Metric::AdjointTrace => "sqrt(a) ||phi_a||_bdry",
            Metric::CostGap => "|J_a - J|",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub control_error: f64,
    pub state_error: f64,
    pub sqrt_alpha_state_trace: f64,
    pub adjoint_error: f64,
    pub sqrt_alpha_adjoint_trace: f64,
    pub cost_alpha: f64,
    pub cost_reference: f64,
    pub cost_gap: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub converged: bool,
    /// Set when the optimization at this `alpha` failed; metrics are NaN.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::ControlError => self.control_error,
            Metric::StateError => self.state_error,
            Metric::StateTrace => self.sqrt_alpha_state_trace,
            Metric::AdjointError => self.adjoint_error,
            Metric::AdjointTrace => self.sqrt_alpha_adjoint_trace,
            Metric::CostGap => self.cost_gap,
        }
    }

    fn failed(alpha: f64, cost_reference: f64, err: &Error) -> Self {
        SweepRow {
            alpha,
            control_error: f64::NAN,
            state_error: f64::NAN,
            sqrt_alpha_state_trace: f64::NAN,
            adjoint_error: f64::NAN,
            sqrt_alpha_adjoint_trace: f64::NAN,
            cost_alpha: f64::NAN,
            cost_reference,
            cost_gap: f64::NAN,
            iterations: 0,
            stationarity: f64::NAN,
            converged: false,
            failure: Some(err.to_string()),
        }
    }
}

/// Result of a trend test on one metric column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub metric: Metric,
    /// Every step satisfies `m_{k+1} <= (1 + tolerance) m_k`.
    pub nonincreasing: bool,
    /// `last / first`.
    pub ratio: f64,
    /// Least-squares slope of `log m` against `log alpha`.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub reference: OptimizationResult,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn column(&self, m: Metric) -> Vec<f64> {
        self.rows.iter().map(|r| r.metric(m)).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.alpha).collect()
    }

    pub fn slope(&self, m: Metric) -> Option<f64> {
        log_log_slope(&self.alphas(), &self.column(m))
    }

    pub fn trend(&self, m: Metric, tolerance: f64) -> Trend {
        let col = self.column(m);
        let nonincreasing = col.iter().all(|v| v.is_finite()) && col.windows(2).all(|w| w[1] <= (1.0 + tolerance) * w[0]);
        let ratio = match (col.first(), col.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            (Some(&a), Some(&b)) if a == 0.0 && b == 0.0 => 0.0,
            _ => f64::NAN,
        };
        Trend {
            metric: m,
            nonincreasing,
            ratio,
            slope: self.slope(m),
        }
    }

    pub fn all_converged(&self) -> bool {
        self.reference.converged() && self.rows.iter().all(|r| r.converged)
    }
}

/// Least-squares slope of `log y` against `log x` over the positive,
/// finite entries; `None` with fewer than two usable points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// No-slip optimum for the same data.
pub fn dirichlet_reference(cfg: &ProblemConfig, set: &AdmissibleSet, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    let cfg = cfg.clone().with_bc(cfg.bc().as_dirichlet())?;
    optimize(&cfg, set, opts)
}

fn spacetime_diff(cfg: &ProblemConfig, a: &[VelocityField], b: &[VelocityField]) -> f64 {
    let grid = cfg.grid();
    spacetime_from_sq(
        (1..a.len()).map(|n| l2_norm(grid, &a[n].difference(&b[n])).powi(2)),
        cfg.time().dt(),
    )
}

fn adjoint_diff(cfg: &ProblemConfig, a: &AdjointTrajectory, b: &AdjointTrajectory) -> f64 {
    let grid = cfg.grid();
    spacetime_from_sq(
        a.velocity.iter().zip(&b.velocity).map(|(x, y)| l2_norm(grid, &x.difference(y)).powi(2)),
        cfg.time().dt(),
    )
}

/// `||(u - b)_tau||` in `L2(0, T; L2(boundary))` over levels `1..=N`.
pub fn state_trace(cfg: &ProblemConfig, velocity: &[VelocityField]) -> f64 {
    let grid = cfg.grid();
    spacetime_from_sq(
        (1..velocity.len()).map(|n| boundary_trace_norm(grid, &velocity[n], cfg.bc().data().at(n)).powi(2)),
        cfg.time().dt(),
    )
}

/// Full boundary trace of the adjoint in `L2(0, T; L2(boundary))`.
pub fn adjoint_trace(cfg: &ProblemConfig, adjoint: &AdjointTrajectory) -> f64 {
    let grid = cfg.grid();
    let zero = vec![0.0; grid.boundary_faces().len()];
    spacetime_from_sq(
        adjoint.velocity.iter().map(|phi| boundary_trace_norm(grid, phi, &zero).powi(2)),
        cfg.time().dt(),
    )
}

fn row(cfg: &ProblemConfig, alpha: f64, reference: &OptimizationResult, result: &OptimizationResult) -> SweepRow {
    let space = ControlSpace::of(cfg);
    let sa = alpha.sqrt();
    let cost_alpha = result.cost.total();
    let cost_reference = reference.cost.total();
    SweepRow {
        alpha,
        control_error: space.distance(&result.control, &reference.control),
        state_error: spacetime_diff(cfg, &result.state.velocity, &reference.state.velocity),
        sqrt_alpha_state_trace: sa * state_trace(cfg, &result.state.velocity),
        adjoint_error: adjoint_diff(cfg, &result.adjoint, &reference.adjoint),
        sqrt_alpha_adjoint_trace: sa * adjoint_trace(cfg, &result.adjoint),
        cost_alpha,
        cost_reference,
        cost_gap: (cost_alpha - cost_reference).abs(),
        iterations: result.history.len().saturating_sub(1),
        stationarity: result.stationarity,
        converged: result.converged(),
        failure: None,
    }
}

fn slip_run(cfg: &ProblemConfig, alpha: f64, set: &AdmissibleSet, opts: &OptimizerOptions, start: Option<Control>) -> Result<OptimizationResult> {
    let slip = cfg.clone().with_bc(cfg.bc().with_alpha(alpha)?)?;
    match start {
        Some(f) => optimize_from(&slip, set, opts, f),
        None => optimize(&slip, set, opts),
    }
}

/// Optimizes under slip walls for every `alpha` and tabulates the distance
/// to the no-slip optimum. A failure at one `alpha` is recorded in its row;
/// only a failure of the reference aborts the sweep.
pub fn run_alpha_sweep(
    cfg: &ProblemConfig,
    set: &AdmissibleSet,
    opts: &OptimizerOptions,
    sweep: &SweepOptions,
) -> Result<SweepReport> {
    sweep.validate(cfg.bc())?;
    let reference = dirichlet_reference(cfg, set, opts)?;
    let j_ref = reference.cost.total();
    let rows = if sweep.warm_start {
        let mut rows = Vec::with_capacity(sweep.alphas.len());
        let mut start: Option<Control> = None;
        for &alpha in &sweep.alphas {
            match slip_run(cfg, alpha, set, opts, start.clone()) {
                Ok(res) => {
                    rows.push(row(cfg, alpha, &reference, &res));
                    start = Some(res.control);
                }
                Err(e) => rows.push(SweepRow::failed(alpha, j_ref, &e)),
            }
        }
        rows
    } else {
        sweep
            .alphas
            .par_iter()
            .map(|&alpha| match slip_run(cfg, alpha, set, opts, None) {
                Ok(res) => row(cfg, alpha, &reference, &res),
                Err(e) => SweepRow::failed(alpha, j_ref, &e),
            })
            .collect()
    };
    Ok(SweepReport { reference, rows })
}
