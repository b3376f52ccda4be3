//! Linearized state and discrete adjoint of the time-stepping scheme.
//!
//! Differentiating step `n` of the forward scheme with respect to the
//! previous level gives
//!
//! ```text
//! A_n v_n + B^T q_n = R_n v_{n-1} + Q g_n,   B v_n = 0,
//! R_n = M/dt - (1 - theta) (L_n + E(u_{n-1})) - theta E(u_n),
//! ```
//!
//! where `A_n` is the forward step matrix and `E(y) = d/dw [C(w) y]` is the
//! Jacobian of the convection in its advecting argument. The adjoint sweep
//! applies the transposes of exactly these matrices backwards in time.

use std::sync::Arc;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::fields::{PressureField, VelocityField};
use crate::forward::{control_load, step_matrices, ProblemConfig, StateTrajectory};
use crate::grid::ControlMask;
use crate::linalg::saddle::{SaddleFactor, SaddleSystem};

/// `v` and `q` at `t_0 ..= t_N`, with `v_0 = 0`.
#[derive(Clone, Debug)]
pub struct LinearizedTrajectory {
    pub velocity: Vec<VelocityField>,
    pub pressure: Vec<PressureField>,
}

/// Adjoint velocity and pressure on levels `0 ..= N`. Level `N` is the
/// terminal condition (exactly zero); level `n - 1` holds the multiplier of
/// forward step `n`, the value paired with the control of that step.
#[derive(Clone, Debug)]
pub struct AdjointTrajectory {
    pub velocity: Vec<VelocityField>,
    pub pressure: Vec<PressureField>,
}

impl AdjointTrajectory {
    pub fn n_levels(&self) -> usize {
        self.velocity.len()
    }
}

fn check_state(cfg: &ProblemConfig, state: &StateTrajectory) -> Result<()> {
    let nt = cfg.time().steps();
    if state.n_levels() != nt + 1 || state.velocity.iter().any(|u| !u.matches(cfg.grid())) {
        return Err(Error::Shape(format!(
            "state trajectory has {} levels, the configuration needs {}",
            state.n_levels(),
            nt + 1
        )));
    }
    Ok(())
}

/// Factorized step system `n` (homogeneous wall data).
fn step_factor(cfg: &ProblemConfig, state: &StateTrajectory, n: usize) -> Result<(SaddleSystem, SaddleFactor)> {
    let ops = cfg.operators();
    let mats = step_matrices(cfg, &state.velocity[n - 1], n);
    let zero = vec![0.0; ops.n_velocity()];
    let sys = SaddleSystem::new(ops, Arc::new(cfg.dofs()), &mats.lhs, &zero, &zero)?;
    let factor = sys.factorize(cfg.solver()).map_err(|e| e.at_step(n))?;
    Ok((sys, factor))
}

/// `R_n v` on the full slot space.
fn apply_r(cfg: &ProblemConfig, state: &StateTrajectory, n: usize, v: &[f64]) -> Vec<f64> {
    let ops = cfg.operators();
    let theta = cfg.scheme().theta();
    let dt = cfg.time().dt();
    let conv = ops.convection();
    let mut out: Vec<f64> = ops.mass().iter().zip(v).map(|(m, v)| m / dt * v).collect();
    // E(y) v = C(v) y
    let e_new = conv.apply(v, state.velocity[n].values());
    out.iter_mut().zip(e_new).for_each(|(o, e)| *o -= theta * e);
    if theta < 1.0 {
        let mats = step_matrices(cfg, &state.velocity[n - 1], n);
        let lv = mats.spatial.matvec(v);
        let e_old = conv.apply(v, state.velocity[n - 1].values());
        for ((o, l), e) in out.iter_mut().zip(lv).zip(e_old) {
            *o -= (1.0 - theta) * (l + e);
        }
    }
    out
}

/// `R_n^T w` on the full slot space.
fn apply_r_transpose(cfg: &ProblemConfig, state: &StateTrajectory, n: usize, w: &[f64]) -> Vec<f64> {
    let ops = cfg.operators();
    let theta = cfg.scheme().theta();
    let dt = cfg.time().dt();
    let conv = ops.convection();
    let mut out: Vec<f64> = ops.mass().iter().zip(w).map(|(m, w)| m / dt * w).collect();
    let mut acc = vec![0.0; w.len()];
    let scaled: Vec<f64> = w.iter().map(|w| -theta * w).collect();
    conv.matrix_in_first(state.velocity[n].values()).transpose_matvec_add(&scaled, &mut acc);
    if theta < 1.0 {
        let scaled: Vec<f64> = w.iter().map(|w| -(1.0 - theta) * w).collect();
        let mats = step_matrices(cfg, &state.velocity[n - 1], n);
        mats.spatial.transpose_matvec_add(&scaled, &mut acc);
        conv.matrix_in_first(state.velocity[n - 1].values())
            .transpose_matvec_add(&scaled, &mut acc);
    }
    out.iter_mut().zip(acc).for_each(|(o, a)| *o += a);
    out
}

fn augmented_rhs(sys: &SaddleSystem, full: &[f64]) -> Vec<f64> {
    let mut rhs = sys.dofs().gather(full);
    rhs.resize(sys.dim(), 0.0);
    rhs
}

/// Linearization of the control-to-state map at `state` in direction `g`.
pub fn solve_linearized(cfg: &ProblemConfig, state: &StateTrajectory, g: &Control) -> Result<LinearizedTrajectory> {
    check_state(cfg, state)?;
    g.check(cfg)?;
    let grid = cfg.grid();
    let nt = cfg.time().steps();
    let mut velocity = vec![VelocityField::zeros(grid)];
    let mut pressure = vec![PressureField::zeros(grid)];
    for n in 1..=nt {
        let (sys, factor) = step_factor(cfg, state, n)?;
        let mut load = apply_r(cfg, state, n, velocity[n - 1].values());
        load.iter_mut()
            .zip(control_load(cfg.mask(), g.level(n - 1)))
            .for_each(|(l, q)| *l += q);
        let (x, _) = factor.solve(&augmented_rhs(&sys, &load)).map_err(|e| e.at_step(n))?;
        let (v, q) = sys.unpack(&x)?;
        velocity.push(v);
        pressure.push(q);
    }
    Ok(LinearizedTrajectory { velocity, pressure })
}

/// Backward sweep for the tracking cost: sources `M (u_n - z_n)`.
pub fn solve_adjoint(cfg: &ProblemConfig, state: &StateTrajectory) -> Result<AdjointTrajectory> {
    check_state(cfg, state)?;
    let sources: Vec<VelocityField> = state
        .velocity
        .iter()
        .zip(cfg.target())
        .map(|(u, z)| u.difference(z))
        .collect();
    solve_adjoint_with_sources(cfg, state, &sources)
}

/// Backward sweep with arbitrary sources given on levels `0 ..= N` (level 0
/// is ignored). The result satisfies
/// `sum_n dt <s_n, v_n> = sum_n dt <phi_{n-1}, g_n>_omega` for every
/// direction `g` and its linearized state `v`.
pub fn solve_adjoint_with_sources(cfg: &ProblemConfig, state: &StateTrajectory, sources: &[VelocityField]) -> Result<AdjointTrajectory> {
    check_state(cfg, state)?;
    let grid = cfg.grid();
    let nt = cfg.time().steps();
    if sources.len() != nt + 1 {
        return Err(Error::Shape(format!("adjoint sources have {} levels, expected {}", sources.len(), nt + 1)));
    }
    if sources.iter().any(|s| !s.matches(grid)) {
        return Err(Error::Shape("adjoint source does not match the grid".into()));
    }
    let mass = cfg.operators().mass();
    let mut velocity = vec![VelocityField::zeros(grid); nt + 1];
    let mut pressure = vec![PressureField::zeros(grid); nt + 1];
    // `next` is the multiplier of step n + 1 (zero past the horizon).
    let mut next = vec![0.0; grid.n_velocity()];
    for n in (1..=nt).rev() {
        let (sys, factor) = step_factor(cfg, state, n)?;
        let mut load: Vec<f64> = sources[n].values().iter().zip(mass).map(|(s, m)| m * s).collect();
        if n < nt {
            let carried = apply_r_transpose(cfg, state, n + 1, &next);
            load.iter_mut().zip(carried).for_each(|(l, c)| *l += c);
        }
        let (x, _) = factor.solve_transpose(&augmented_rhs(&sys, &load)).map_err(|e| e.at_step(n))?;
        let nf = sys.n_free();
        let mut phi = vec![0.0; grid.n_velocity()];
        sys.dofs().scatter(&x[..nf], &mut phi);
        let mut pi = PressureField::from_values(grid, x[nf..nf + sys.n_cells()].to_vec())?;
        pi.remove_mean();
        next = phi.clone();
        velocity[n - 1] = VelocityField::from_values(grid, phi)?;
        pressure[n - 1] = pi;
    }
    Ok(AdjointTrajectory { velocity, pressure })
}

/// Representer of the derivative of the reduced cost in space-time
/// `L2(omega)`: `phi` restricted to the control region plus `M f`.
pub fn cost_gradient(adjoint: &AdjointTrajectory, f: &Control, m: f64, mask: &ControlMask) -> Control {
    let mut levels = Vec::with_capacity(f.n_levels());
    for (k, fk) in f.levels().iter().enumerate() {
        let mut g = adjoint.velocity[k].clone();
        g.axpy(m, fk);
        for (s, v) in g.values_mut().iter_mut().enumerate() {
            if !mask.contains(s) {
                *v = 0.0;
            }
        }
        levels.push(g);
    }
    Control::from_raw(levels)
}
