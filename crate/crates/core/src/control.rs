//! Controls, the tracking cost, admissible sets and the projected-gradient
//! optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{cost_gradient, solve_adjoint, AdjointTrajectory};
use crate::error::{Error, Result};
use crate::fields::{l2_norm, weighted_dot, VelocityField};
use crate::forward::{solve_forward, ProblemConfig, StateTrajectory};
use crate::grid::{ControlMask, Grid};

/// Forcing on the control region at `t_1 ..= t_N` (index `k` holds the
/// value used by step `k + 1`). Values outside the mask support are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    levels: Vec<VelocityField>,
}

impl Control {
    pub fn zeros(grid: &Grid, steps: usize) -> Self {
        Control {
            levels: vec![VelocityField::zeros(grid); steps],
        }
    }

    pub fn zeros_for(cfg: &ProblemConfig) -> Self {
        Self::zeros(cfg.grid(), cfg.time().steps())
    }

    /// Builds a control from per-step fields, zeroing everything outside the
    /// control region.
    pub fn from_levels(cfg: &ProblemConfig, levels: Vec<VelocityField>) -> Result<Self> {
        if levels.len() != cfg.time().steps() {
            return Err(Error::config(
                "control",
                format!("needs {} time levels, got {}", cfg.time().steps(), levels.len()),
            ));
        }
        if let Some(bad) = levels.iter().position(|f| !f.matches(cfg.grid())) {
            return Err(Error::Shape(format!("control level {bad} does not match the grid")));
        }
        let mut c = Control { levels };
        c.restrict(cfg.mask());
        Ok(c)
    }

    /// Samples `f(t, x, y)` at `t_1 ..= t_N` and restricts it to the region.
    pub fn sample(cfg: &ProblemConfig, f: impl Fn(f64, f64, f64) -> [f64; 2]) -> Self {
        let levels = (1..=cfg.time().steps())
            .map(|n| {
                let t = cfg.time().time(n);
                VelocityField::sample(cfg.grid(), |x, y| f(t, x, y))
            })
            .collect();
        let mut c = Control { levels };
        c.restrict(cfg.mask());
        c
    }

    pub(crate) fn from_raw(levels: Vec<VelocityField>) -> Self {
        Control { levels }
    }

    pub fn levels(&self) -> &[VelocityField] {
        &self.levels
    }
    pub fn level(&self, k: usize) -> &VelocityField {
        &self.levels[k]
    }
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn check(&self, cfg: &ProblemConfig) -> Result<()> {
        if self.levels.len() != cfg.time().steps() {
            return Err(Error::config(
                "control",
                format!("needs {} time levels, got {}", cfg.time().steps(), self.levels.len()),
            ));
        }
        if self.levels.iter().any(|f| !f.matches(cfg.grid())) {
            return Err(Error::Shape("control does not match the grid".into()));
        }
        Ok(())
    }

    pub fn restrict(&mut self, mask: &ControlMask) {
        for f in &mut self.levels {
            for (s, v) in f.values_mut().iter_mut().enumerate() {
                if !mask.contains(s) {
                    *v = 0.0;
                }
            }
        }
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Control) -> Control {
        let mut out = self.clone();
        for (x, y) in out.levels.iter_mut().zip(&other.levels) {
            x.axpy(a, y);
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Control {
        let mut out = self.clone();
        out.levels.iter_mut().for_each(|f| f.scale(a));
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    fn map_support(&self, mask: &ControlMask, mut op: impl FnMut(f64) -> f64) -> Control {
        let mut out = self.clone();
        for f in &mut out.levels {
            for (s, v) in f.values_mut().iter_mut().enumerate() {
                if mask.contains(s) {
                    *v = op(*v);
                }
            }
        }
        out
    }
}

/// Space-time `L2(0, T; L2(omega))` geometry of the controls.
#[derive(Clone, Debug)]
pub struct ControlSpace {
    mask: ControlMask,
    dt: f64,
}

impl ControlSpace {
    pub fn new(mask: ControlMask, dt: f64) -> Self {
        ControlSpace { mask, dt }
    }

    pub fn of(cfg: &ProblemConfig) -> Self {
        Self::new(cfg.mask().clone(), cfg.time().dt())
    }

    pub fn mask(&self) -> &ControlMask {
        &self.mask
    }

    pub fn inner(&self, a: &Control, b: &Control) -> f64 {
        self.dt
            * a.levels
                .iter()
                .zip(&b.levels)
                .map(|(x, y)| weighted_dot(self.mask.quadrature(), x.values(), y.values()))
                .sum::<f64>()
    }

    pub fn norm(&self, a: &Control) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn distance(&self, a: &Control, b: &Control) -> f64 {
        self.norm(&a.axpy(-1.0, b))
    }
}

/// Closed convex set of admissible controls.
#[derive(Clone, Debug, PartialEq)]
pub enum AdmissibleSet {
    Unconstrained,
    /// `||f - center|| <= radius` in space-time `L2(omega)`.
    Ball { center: Control, radius: f64 },
    /// `lower <= f <= upper` at every slot of the control region.
    Box { lower: f64, upper: f64 },
}

impl AdmissibleSet {
    pub fn ball(center: Control, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("admissible.radius", "ball radius must be positive"));
        }
        Ok(AdmissibleSet::Ball { center, radius })
    }

    pub fn bounds(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::config("admissible.lower", "box bounds must be finite with lower <= upper"));
        }
        Ok(AdmissibleSet::Box { lower, upper })
    }

    /// The singleton `{0}`.
    pub fn zero() -> Self {
        AdmissibleSet::Box { lower: 0.0, upper: 0.0 }
    }

    /// Canonical first iterate: the ball center, else the projection of 0.
    pub fn start(&self, cfg: &ProblemConfig) -> Control {
        match self {
            AdmissibleSet::Ball { center, .. } => center.clone(),
            _ => project(&Control::zeros_for(cfg), self, &ControlSpace::of(cfg)),
        }
    }

    pub fn contains(&self, f: &Control, space: &ControlSpace, slack: f64) -> bool {
        match self {
            AdmissibleSet::Unconstrained => true,
            AdmissibleSet::Ball { center, radius } => space.distance(f, center) <= radius * (1.0 + slack),
            AdmissibleSet::Box { lower, upper } => f.levels.iter().all(|l| {
                l.values()
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| space.mask.contains(*s))
                    .all(|(_, v)| *v >= lower - slack && *v <= upper + slack)
            }),
        }
    }

    /// Random member of the set (for sampling the variational inequality).
    pub fn sample(&self, space: &ControlSpace, like: &Control, scale: f64, rng: &mut impl Rng) -> Control {
        let noise = like.map_support(&space.mask, |_| rng.random_range(-1.0..1.0));
        match self {
            AdmissibleSet::Unconstrained => noise.scaled(scale),
            AdmissibleSet::Ball { center, radius } => {
                let n = space.norm(&noise);
                let r = radius * rng.random_range(0.0..=1.0f64);
                if n == 0.0 {
                    center.clone()
                } else {
                    center.axpy(r / n, &noise)
                }
            }
            AdmissibleSet::Box { lower, upper } => {
                let (l, u) = (*lower, *upper);
                noise.map_support(&space.mask, |v| l + 0.5 * (v + 1.0) * (u - l))
            }
        }
    }
}

/// Metric projection onto the admissible set.
pub fn project(c: &Control, set: &AdmissibleSet, space: &ControlSpace) -> Control {
    match set {
        AdmissibleSet::Unconstrained => c.clone(),
        AdmissibleSet::Ball { center, radius } => {
            let d = c.axpy(-1.0, center);
            let n = space.norm(&d);
            // a few ulps of slack make the projection exactly idempotent
            if n <= *radius * (1.0 + 4.0 * f64::EPSILON) {
                c.clone()
            } else {
                center.axpy(radius / n, &d)
            }
        }
        AdmissibleSet::Box { lower, upper } => c.map_support(&space.mask, |v| v.clamp(*lower, *upper)),
    }
}

/// `||f - P(f - grad)||`: zero exactly when the discrete variational
/// inequality holds at `f`.
pub fn stationarity_residual(f: &Control, grad: &Control, set: &AdmissibleSet, space: &ControlSpace) -> f64 {
    let trial = project(&f.axpy(-1.0, grad), set, space);
    space.distance(f, &trial)
}

/// `||f - P(-phi/M)||` with `phi` restricted to the control region.
pub fn fixed_point_residual(f: &Control, adjoint: &AdjointTrajectory, m: f64, set: &AdmissibleSet, space: &ControlSpace) -> f64 {
    let phi = cost_gradient(adjoint, &f.scaled(0.0), m, &space.mask);
    space.distance(f, &project(&phi.scaled(-1.0 / m), set, space))
}

/// Tracking and regularization parts of the cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    /// `1/2 sum_n dt ||u_n - z_n||^2`
    pub tracking: f64,
    /// `M/2 ||f||^2` in space-time `L2(omega)`
    pub regularization: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.tracking + self.regularization
    }
}

pub fn evaluate_cost(cfg: &ProblemConfig, state: &StateTrajectory, f: &Control) -> Result<CostBreakdown> {
    let nt = cfg.time().steps();
    if state.n_levels() != nt + 1 {
        return Err(Error::Shape(format!("state has {} levels, expected {}", state.n_levels(), nt + 1)));
    }
    f.check(cfg)?;
    let dt = cfg.time().dt();
    let grid = cfg.grid();
    let tracking = 0.5
        * dt
        * (1..=nt)
            .map(|n| l2_norm(grid, &state.velocity[n].difference(&cfg.target()[n])).powi(2))
            .sum::<f64>();
    let regularization = 0.5 * cfg.cost_weight() * ControlSpace::of(cfg).norm(f).powi(2);
    Ok(CostBreakdown {
        tracking,
        regularization,
    })
}

/// Cost and state at one control.
pub fn cost_at(cfg: &ProblemConfig, f: &Control) -> Result<(CostBreakdown, StateTrajectory)> {
    let state = solve_forward(cfg, f)?;
    let cost = evaluate_cost(cfg, &state, f)?;
    Ok((cost, state))
}

/// Gradient (representer in space-time `L2(omega)`) and adjoint at a
/// control whose state is already known.
pub fn gradient_at(cfg: &ProblemConfig, f: &Control, state: &StateTrajectory) -> Result<(Control, AdjointTrajectory)> {
    let adjoint = solve_adjoint(cfg, state)?;
    let grad = cost_gradient(&adjoint, f, cfg.cost_weight(), cfg.mask());
    Ok((grad, adjoint))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    /// First trial step; `None` means `1/M`.
    pub step0: Option<f64>,
    /// Armijo sufficient-decrease factor.
    pub sigma: f64,
    /// Backtracking ratio.
    pub shrink: f64,
    /// Target for the stationarity and fixed-point residuals.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            step0: None,
            sigma: 1e-4,
            shrink: 0.5,
            tol: 1e-7,
            max_iter: 100,
            max_backtracks: 30,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("optimizer.step0", "must be positive"));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::config("optimizer.sigma", "Armijo factor must lie in (0, 1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("optimizer.shrink", "backtracking ratio must lie in (0, 1)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("optimizer.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("optimizer.max_iter", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub tracking: f64,
    pub regularization: f64,
    pub stationarity: f64,
    /// Accepted step (0 for the initial iterate).
    pub step: f64,
    pub backtracks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub control: Control,
    pub cost: CostBreakdown,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub stationarity: f64,
    pub gradient: Control,
    pub state: StateTrajectory,
    pub adjoint: AdjointTrajectory,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Projected gradient with Armijo backtracking, started from the canonical
/// point of the set.
pub fn optimize(cfg: &ProblemConfig, set: &AdmissibleSet, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    optimize_from(cfg, set, opts, set.start(cfg))
}

/// Same as [`optimize`] from a given first iterate (projected first).
pub fn optimize_from(cfg: &ProblemConfig, set: &AdmissibleSet, opts: &OptimizerOptions, start: Control) -> Result<OptimizationResult> {
    opts.validate()?;
    start.check(cfg)?;
    let space = ControlSpace::of(cfg);
    let step0 = opts.step0.unwrap_or(1.0 / cfg.cost_weight());

    let mut f = project(&start, set, &space);
    let (mut cost, mut state) = cost_at(cfg, &f)?;
    let (mut grad, mut adjoint) = gradient_at(cfg, &f, &state)?;
    let mut res = stationarity_residual(&f, &grad, set, &space);
    let mut history = vec![IterationRecord {
        iter: 0,
        cost: cost.total(),
        tracking: cost.tracking,
        regularization: cost.regularization,
        stationarity: res,
        step: 0.0,
        backtracks: 0,
    }];
    // the fixed-point map is checked as well: for small M it is the
    // stricter of the two residuals
    let done = |f: &Control, adjoint: &AdjointTrajectory, res: f64| {
        res <= opts.tol && fixed_point_residual(f, adjoint, cfg.cost_weight(), set, &space) <= opts.tol
    };
    let mut step = step0;
    let mut termination = Termination::MaxIterations;

    for iter in 1..=opts.max_iter {
        if done(&f, &adjoint, res) {
            termination = Termination::Converged;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for bt in 0..=opts.max_backtracks {
            let cand = project(&f.axpy(-t, &grad), set, &space);
            let slope = space.inner(&grad, &cand.axpy(-1.0, &f));
            let (c_cost, c_state) = cost_at(cfg, &cand)?;
            if c_cost.total() <= cost.total() + opts.sigma * slope {
                accepted = Some((cand, c_cost, c_state, bt));
                break;
            }
            t *= opts.shrink;
        }
        let Some((cand, c_cost, c_state, bt)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        f = cand;
        cost = c_cost;
        state = c_state;
        (grad, adjoint) = gradient_at(cfg, &f, &state)?;
        res = stationarity_residual(&f, &grad, set, &space);
        history.push(IterationRecord {
            iter,
            cost: cost.total(),
            tracking: cost.tracking,
            regularization: cost.regularization,
            stationarity: res,
            step: t,
            backtracks: bt,
        });
        step = (t / opts.shrink).min(step0);
    }
    if done(&f, &adjoint, res) {
        termination = Termination::Converged;
    }
    Ok(OptimizationResult {
        control: f,
        cost,
        history,
        termination,
        stationarity: res,
        gradient: grad,
        state,
        adjoint,
    })
}

/// Minimum over `samples` random admissible `g` of the variational
/// inequality `<grad, g - f>`, normalized by `||g - f||` times the size
/// `||phi|| + M ||f||` of the two gradient contributions.
pub fn sampled_vi(
    f: &Control,
    grad: &Control,
    m: f64,
    set: &AdmissibleSet,
    space: &ControlSpace,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let fm = m * space.norm(f);
    let phi = space.norm(&grad.axpy(-m, f));
    let size = (phi + fm).max(f64::MIN_POSITIVE);
    let spread = space.norm(f).max(1.0);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let g = set.sample(space, f, spread, rng);
        let d = g.axpy(-1.0, f);
        let dn = space.norm(&d);
        let value = if dn == 0.0 { 0.0 } else { space.inner(grad, &d) / (size * dn) };
        worst = worst.min(value);
    }
    worst
}
