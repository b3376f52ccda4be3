//! Time integration of the Dirichlet and Navier-slip state systems.
//!
//! Each step solves one coupled Oseen system with the previous level as
//! advecting field:
//!
//! ```text
//! (M/dt + theta L_n) u_n + B^T p_n = (M/dt - (1 - theta) L_n) u_{n-1} + Q f_n + M g + boundary load
//!                            B u_n = 0
//! ```
//!
//! with `L_n = 2 mu K + friction + C(u_{n-1})`, `Q` the control-region
//! quadrature and `g` an optional steady body force. `theta = 1` is implicit
//! Euler, `theta = 1/2` Crank-Nicolson.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::Control;
use crate::error::{Error, Result};
use crate::fields::{boundary_trace_norm, divergence, l2_norm, strain_norm_sq, BoundaryData, PressureField, VelocityField};
use crate::grid::{ControlMask, Grid, TimeGrid};
use crate::linalg::operators::Operators;
use crate::linalg::saddle::{
    add_diagonal, boundary_load, constrained_values, spatial_operator, DofMap, SaddleSolution, SaddleSystem,
    SolverOptions,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BcKind {
    Dirichlet,
    NavierSlip { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcSpec {
    kind: BcKind,
    data: BoundaryData,
}

impl BcSpec {
    pub fn dirichlet(data: BoundaryData) -> Self {
        BcSpec {
            kind: BcKind::Dirichlet,
            data,
        }
    }

    /// Slip walls with friction `alpha`; requires `alpha > sup|b| + 1`.
    pub fn navier_slip(alpha: f64, data: BoundaryData) -> Result<Self> {
        let bc = BcSpec {
            kind: BcKind::NavierSlip { alpha },
            data,
        };
        bc.validate()?;
        Ok(bc)
    }

    pub fn validate(&self) -> Result<()> {
        if let BcKind::NavierSlip { alpha } = self.kind {
            let bound = self.data.sup_norm() + 1.0;
            if !(alpha.is_finite() && alpha > bound) {
                return Err(Error::config(
                    "bc.alpha",
                    format!("slip friction must satisfy alpha > ||b||_inf + 1 = {bound}, got {alpha}"),
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> BcKind {
        self.kind
    }
    pub fn data(&self) -> &BoundaryData {
        &self.data
    }
    pub fn is_slip(&self) -> bool {
        matches!(self.kind, BcKind::NavierSlip { .. })
    }
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            BcKind::NavierSlip { alpha } => Some(alpha),
            BcKind::Dirichlet => None,
        }
    }

    /// Same data with slip friction `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::navier_slip(alpha, self.data.clone())
    }

    /// Same data with no-slip walls.
    pub fn as_dirichlet(&self) -> Self {
        Self::dirichlet(self.data.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub mu: f64,
}

impl FluidParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config("fluid.mu", "viscosity must be positive and finite"));
        }
        Ok(FluidParams { mu })
    }
}

/// Weight `theta` of the new level in the viscous, friction and
/// convective terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

/// Everything that defines one state problem and its tracking cost.
#[derive(Clone, Debug)]
pub struct ProblemConfig {
    ops: Arc<Operators>,
    time: TimeGrid,
    bc: BcSpec,
    fluid: FluidParams,
    scheme: TimeScheme,
    initial: VelocityField,
    body_force: VelocityField,
    mask: ControlMask,
    target: Vec<VelocityField>,
    cost_weight: f64,
    solver: SolverOptions,
}

impl ProblemConfig {
    /// Zero initial state, zero target, zero body force and `M = 1`.
    pub fn new(grid: &Grid, time: TimeGrid, bc: BcSpec, fluid: FluidParams, mask: ControlMask) -> Result<Self> {
        bc.validate()?;
        if bc.data().n_levels() != 1 && bc.data().n_levels() != time.steps() + 1 {
            return Err(Error::config(
                "bc.data",
                format!("needs 1 or {} time levels, got {}", time.steps() + 1, bc.data().n_levels()),
            ));
        }
        let zero = VelocityField::zeros(grid);
        Ok(ProblemConfig {
            ops: Arc::new(Operators::new(grid)),
            time,
            bc,
            fluid,
            scheme: TimeScheme::ImplicitEuler,
            initial: zero.clone(),
            body_force: zero.clone(),
            mask,
            target: vec![zero; time.steps() + 1],
            cost_weight: 1.0,
            solver: SolverOptions::default(),
        })
    }

    /// Sets the initial state after projecting it onto the discretely
    /// divergence-free fields with the wall values of level 0.
    pub fn with_initial(mut self, a: VelocityField) -> Result<Self> {
        self.check_field(&a, "initial")?;
        self.initial = project_divergence_free(&self.ops, &self.bc, &a, &self.solver)?;
        Ok(self)
    }

    pub fn with_target(mut self, target: Vec<VelocityField>) -> Result<Self> {
        if target.len() != self.time.steps() + 1 {
            return Err(Error::config(
                "target",
                format!("needs {} time levels, got {}", self.time.steps() + 1, target.len()),
            ));
        }
        for z in &target {
            self.check_field(z, "target")?;
        }
        self.target = target;
        Ok(self)
    }

    pub fn with_cost_weight(mut self, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::config("cost.m", "regularization weight M must be positive"));
        }
        self.cost_weight = m;
        Ok(self)
    }

    pub fn with_body_force(mut self, g: VelocityField) -> Result<Self> {
        self.check_field(&g, "body_force")?;
        self.body_force = g;
        Ok(self)
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Result<Self> {
        solver.validate()?;
        self.solver = solver;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Same problem with different wall conditions. The initial state is
    /// re-projected so that it matches the new constraints.
    pub fn with_bc(mut self, bc: BcSpec) -> Result<Self> {
        bc.validate()?;
        let a = self.initial.clone();
        self.bc = bc;
        self.initial = project_divergence_free(&self.ops, &self.bc, &a, &self.solver)?;
        Ok(self)
    }

    fn check_field(&self, f: &VelocityField, key: &str) -> Result<()> {
        if !f.matches(self.grid()) {
            return Err(Error::Shape(format!("{key} does not match the grid layout")));
        }
        if !f.is_finite() {
            return Err(Error::config(key, "values must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        self.ops.grid()
    }
    pub fn operators(&self) -> &Operators {
        &self.ops
    }
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }
    pub fn bc(&self) -> &BcSpec {
        &self.bc
    }
    pub fn fluid(&self) -> FluidParams {
        self.fluid
    }
    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }
    pub fn initial(&self) -> &VelocityField {
        &self.initial
    }
    pub fn body_force(&self) -> &VelocityField {
        &self.body_force
    }
    pub fn mask(&self) -> &ControlMask {
        &self.mask
    }
    pub fn target(&self) -> &[VelocityField] {
        &self.target
    }
    pub fn cost_weight(&self) -> f64 {
        self.cost_weight
    }
    pub fn solver(&self) -> &SolverOptions {
        &self.solver
    }

    pub(crate) fn dofs(&self) -> DofMap {
        DofMap::for_bc(self.grid(), &self.bc)
    }
}

/// Velocity and pressure at `t_0 ..= t_N` with the linear-solver residual
/// of every step.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub velocity: Vec<VelocityField>,
    pub pressure: Vec<PressureField>,
    pub residuals: Vec<f64>,
}

impl StateTrajectory {
    pub fn n_levels(&self) -> usize {
        self.velocity.len()
    }
    pub fn last(&self) -> &VelocityField {
        self.velocity.last().expect("trajectory has at least one level")
    }
    /// Largest `|div u|` over all cells and levels.
    pub fn max_divergence(&self, grid: &Grid) -> f64 {
        self.velocity
            .iter()
            .map(|u| divergence(grid, u).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }
}

/// Matrices of step `n` that do not depend on the new level.
pub(crate) struct StepMatrices {
    /// `M/dt + theta L_n` on the full slot space.
    pub lhs: crate::linalg::sparse::CsrMatrix,
    /// `L_n` (needed for the explicit part when `theta < 1`).
    pub spatial: crate::linalg::sparse::CsrMatrix,
}

pub(crate) fn step_matrices(cfg: &ProblemConfig, prev: &VelocityField, n: usize) -> StepMatrices {
    let ops = cfg.operators();
    let theta = cfg.scheme().theta();
    let spatial = spatial_operator(ops, cfg.bc(), cfg.fluid().mu, Some(prev.values()), n);
    let dt = cfg.time().dt();
    let m: Vec<f64> = ops.mass().iter().map(|m| m / dt).collect();
    let lhs = add_diagonal(&spatial.scaled(theta), &m);
    StepMatrices { lhs, spatial }
}

/// `Q f`: weak-form load of a control field over the control region.
pub(crate) fn control_load(mask: &ControlMask, f: &VelocityField) -> Vec<f64> {
    mask.quadrature().iter().zip(f.values()).map(|(q, v)| q * v).collect()
}

/// Advances the state from level `n - 1` to level `n` (`1 <= n <= N`).
pub fn advance_step(prev: &VelocityField, cfg: &ProblemConfig, n: usize, f_n: Option<&VelocityField>) -> Result<SaddleSolution> {
    let grid = cfg.grid();
    if n == 0 || n > cfg.time().steps() {
        return Err(Error::config("step", format!("must lie in 1..={}", cfg.time().steps())));
    }
    if !prev.matches(grid) {
        return Err(Error::Shape("previous level does not match the grid".into()));
    }
    let ops = cfg.operators();
    let theta = cfg.scheme().theta();
    let dt = cfg.time().dt();
    let mats = step_matrices(cfg, prev, n);

    let mut load: Vec<f64> = prev.values().iter().zip(ops.mass()).map(|(u, m)| m / dt * u).collect();
    if theta < 1.0 {
        let lu = mats.spatial.matvec(prev.values());
        load.iter_mut().zip(lu).for_each(|(l, v)| *l -= (1.0 - theta) * v);
    }
    if let Some(f) = f_n {
        load.iter_mut().zip(control_load(cfg.mask(), f)).for_each(|(l, v)| *l += v);
    }
    for ((l, m), g) in load.iter_mut().zip(ops.mass()).zip(cfg.body_force().values()) {
        *l += m * g;
    }
    let bl_new = boundary_load(ops, cfg.bc(), n);
    let bl_old = boundary_load(ops, cfg.bc(), n - 1);
    for ((l, a), b) in load.iter_mut().zip(bl_new).zip(bl_old) {
        *l += theta * a + (1.0 - theta) * b;
    }

    let dofs = Arc::new(cfg.dofs());
    let sys = SaddleSystem::new(ops, dofs, &mats.lhs, &load, &constrained_values(ops, cfg.bc(), n))?;
    let sol = sys.solve(cfg.solver()).map_err(|e| e.at_step(n))?;
    if !sol.velocity.is_finite() || !sol.pressure.0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { step: n });
    }
    Ok(sol)
}

/// Runs all `N` steps from the configured initial state.
pub fn solve_forward(cfg: &ProblemConfig, f: &Control) -> Result<StateTrajectory> {
    let nt = cfg.time().steps();
    f.check(cfg)?;
    let mut velocity = Vec::with_capacity(nt + 1);
    let mut pressure = Vec::with_capacity(nt + 1);
    let mut residuals = Vec::with_capacity(nt);
    velocity.push(cfg.initial().clone());
    pressure.push(PressureField::zeros(cfg.grid()));
    for n in 1..=nt {
        let sol = advance_step(&velocity[n - 1], cfg, n, Some(f.level(n - 1)))?;
        velocity.push(sol.velocity);
        pressure.push(sol.pressure);
        residuals.push(sol.residual);
    }
    Ok(StateTrajectory {
        velocity,
        pressure,
        residuals,
    })
}

/// Steady Stokes flow `-div sigma(u, p) = g` with the given walls (data of
/// time level 0).
pub fn solve_steady_stokes(
    grid: &Grid,
    bc: &BcSpec,
    fluid: FluidParams,
    body_force: &VelocityField,
    solver: &SolverOptions,
) -> Result<SaddleSolution> {
    bc.validate()?;
    if !body_force.matches(grid) {
        return Err(Error::Shape("body force does not match the grid".into()));
    }
    let ops = Operators::new(grid);
    let a = spatial_operator(&ops, bc, fluid.mu, None, 0);
    let mut load = boundary_load(&ops, bc, 0);
    for ((l, m), g) in load.iter_mut().zip(ops.mass()).zip(body_force.values()) {
        *l += m * g;
    }
    let sys = SaddleSystem::new(&ops, Arc::new(DofMap::for_bc(grid, bc)), &a, &load, &constrained_values(&ops, bc, 0))?;
    sys.solve(solver)
}

/// Closest discretely divergence-free field to `a` in the mass-weighted
/// norm, with the wall values of `bc` at level 0. Wall-trace slots carry no
/// mass and do not enter the divergence, so they keep their values.
pub fn project_divergence_free(ops: &Operators, bc: &BcSpec, a: &VelocityField, solver: &SolverOptions) -> Result<VelocityField> {
    let w: Vec<f64> = ops.mass().iter().map(|&m| if m > 0.0 { m } else { 1.0 }).collect();
    let mat = crate::linalg::sparse::CsrMatrix::diagonal(&w);
    let load: Vec<f64> = w.iter().zip(a.values()).map(|(w, a)| w * a).collect();
    let sys = SaddleSystem::new(ops, Arc::new(DofMap::for_bc(ops.grid(), bc)), &mat, &load, &constrained_values(ops, bc, 0))?;
    Ok(sys.solve(solver)?.velocity)
}

/// Terms of the discrete energy balance of one step under homogeneous
/// data: `kinetic_new - kinetic_old + dissipation + friction <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyStep {
    pub step: usize,
    /// `1/2 ||u_{n-1}||^2`
    pub kinetic_old: f64,
    /// `1/2 ||u_n||^2`
    pub kinetic_new: f64,
    /// `2 mu dt ||D(u_n)||^2`
    pub dissipation: f64,
    /// `alpha dt ||(u_n)_tau||^2` over the boundary (zero for Dirichlet).
    pub friction: f64,
}

impl EnergyStep {
    pub fn balance(&self) -> f64 {
        self.kinetic_new - self.kinetic_old + self.dissipation + self.friction
    }

    /// Balance relative to the kinetic energy entering the step.
    pub fn relative_slack(&self) -> f64 {
        let scale = self.kinetic_old.max(f64::MIN_POSITIVE);
        self.balance() / scale
    }
}

/// Energy bookkeeping of every step of a trajectory.
pub fn energy_report(cfg: &ProblemConfig, traj: &StateTrajectory) -> Vec<EnergyStep> {
    let grid = cfg.grid();
    let dt = cfg.time().dt();
    let mu = cfg.fluid().mu;
    let zero_b = vec![0.0; grid.boundary_faces().len()];
    (1..traj.n_levels())
        .map(|n| {
            let (u0, u1) = (&traj.velocity[n - 1], &traj.velocity[n]);
            let friction = match cfg.bc().alpha() {
                Some(alpha) => alpha * dt * boundary_trace_norm(grid, u1, &zero_b).powi(2),
                None => 0.0,
            };
            EnergyStep {
                step: n,
                kinetic_old: 0.5 * l2_norm(grid, u0).powi(2),
                kinetic_new: 0.5 * l2_norm(grid, u1).powi(2),
                dissipation: 2.0 * mu * dt * strain_norm_sq(grid, u1),
                friction,
            }
        })
        .collect()
}
