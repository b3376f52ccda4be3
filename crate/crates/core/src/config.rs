//! Run configuration read from TOML, validated at load and turned into a
//! [`ProblemConfig`] plus admissible set, optimizer and sweep options.
//!
//! ```toml
//! [grid]
//! extent = [1.0, 1.0]
//! resolution = [32, 32]
//!
//! [time]
//! final_time = 0.5
//! steps = 10
//!
//! [bc]
//! kind = "slip"
//! alpha = 100.0
//!
//! [control]
//! region = [0.25, 0.75, 0.25, 0.75]
//!
//! [target]
//! source = "recorded"
//! control = { preset = "taylor-vortex", amplitude = 4.0 }
//!
//! [admissible]
//! kind = "ball"
//! radius = 2.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AdmissibleSet, Control, OptimizerOptions};
use crate::error::{Error, Result};
use crate::fields::{BoundaryData, VelocityField};
use crate::forward::{solve_forward, BcSpec, FluidParams, ProblemConfig, TimeScheme};
use crate::grid::{ControlMask, Grid, Rect, TimeGrid};
use crate::linalg::saddle::SolverOptions;
use crate::presets::{FieldPreset, PresetContext};
use crate::sweep::SweepOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub extent: [f64; 2],
    pub resolution: [usize; 2],
    /// Channel periodic in x with walls only at `y = 0` and `y = ly`.
    #[serde(default)]
    pub periodic_x: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub final_time: f64,
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: TimeScheme,
}

fn default_scheme() -> TimeScheme {
    TimeScheme::ImplicitEuler
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSection {
    pub mu: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        FluidSection { mu: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcChoice {
    Dirichlet,
    Slip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub kind: BcChoice,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Wall velocity; only its tangential part is used, sampled at `t = 0`.
    #[serde(default)]
    pub data: FieldPreset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// `[x0, x1, y0, y1]`
    pub region: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordWalls {
    /// Record under no-slip walls.
    Dirichlet,
    /// Record under the configured walls.
    Config,
}

fn record_walls_default() -> RecordWalls {
    RecordWalls::Dirichlet
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSection {
    /// Analytic field evaluated at every time level.
    Field { field: FieldPreset },
    /// State trajectory of a forward solve driven by `control`.
    Recorded {
        control: FieldPreset,
        #[serde(default = "record_walls_default")]
        walls: RecordWalls,
    },
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection::Field {
            field: FieldPreset::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AdmissibleSection {
    Unconstrained,
    Ball {
        radius: f64,
        #[serde(default)]
        center: FieldPreset,
    },
    Box {
        lower: f64,
        upper: f64,
    },
    /// The singleton `{0}`: no control.
    Zero,
}

impl Default for AdmissibleSection {
    fn default() -> Self {
        AdmissibleSection::Unconstrained
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub m: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection { m: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a field checkpoint every `k` levels (0: first and last only).
    pub checkpoint_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub directions: usize,
    pub eps: Vec<f64>,
    pub threshold: f64,
    pub seed: u64,
    /// Control at which the gradient is checked.
    pub at: FieldPreset,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection {
            directions: 5,
            eps: vec![1e-4],
            threshold: 1e-5,
            seed: 1,
            at: FieldPreset::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub samples: usize,
    pub seed: u64,
    pub slack: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            samples: 20,
            seed: 7,
            slack: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads for parallel sweeps; unset means all cores.
    pub threads: Option<usize>,
}

/// Full run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub fluid: FluidSection,
    pub bc: BcSection,
    pub control: ControlSection,
    #[serde(default)]
    pub initial: FieldPreset,
    #[serde(default)]
    pub body_force: FieldPreset,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub admissible: AdmissibleSection,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
    #[serde(default)]
    pub energycheck: EnergySection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// Checks every precondition that can be decided without solving.
    pub fn validate(&self) -> Result<()> {
        let [lx, ly] = self.grid.extent;
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::config("grid.extent", "lengths must be positive and finite"));
        }
        if self.grid.resolution.iter().any(|&n| n < 4) {
            return Err(Error::config("grid.resolution", "at least 4 cells per direction"));
        }
        if !(self.time.final_time > 0.0 && self.time.final_time.is_finite()) {
            return Err(Error::config("time.final_time", "must be positive"));
        }
        if self.time.steps == 0 {
            return Err(Error::config("time.steps", "must be positive"));
        }
        FluidParams::new(self.fluid.mu)?;
        match (self.bc.kind, self.bc.alpha) {
            (BcChoice::Slip, None) => return Err(Error::config("bc.alpha", "required for slip walls")),
            (BcChoice::Slip, Some(a)) => {
                let sup = self.sup_wall_speed()?;
                if !(a > sup + 1.0) {
                    return Err(Error::config(
                        "bc.alpha",
                        format!("slip friction must satisfy alpha > ||b||_inf + 1 = {}, got {a}", sup + 1.0),
                    ));
                }
            }
            (BcChoice::Dirichlet, _) => {}
        }
        self.bc.data.validate("bc.data")?;
        self.initial.validate("initial")?;
        self.body_force.validate("body_force")?;
        let [x0, x1, y0, y1] = self.control.region;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::config("control.region", "region must be non-empty (x0 < x1, y0 < y1)"));
        }
        if !(x0 > 0.0 && x1 < lx && y0 > 0.0 && y1 < ly) {
            return Err(Error::config(
                "control.region",
                "region must be compactly contained in the domain (positive distance to every wall)",
            ));
        }
        if !(self.cost.m > 0.0 && self.cost.m.is_finite()) {
            return Err(Error::config("cost.m", "regularization weight M must be positive"));
        }
        match &self.admissible {
            AdmissibleSection::Ball { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::config("admissible.radius", "ball radius must be positive"));
                }
                center.validate("admissible.center")?;
            }
            AdmissibleSection::Box { lower, upper } => {
                if !(lower <= upper) {
                    return Err(Error::config("admissible.lower", "must not exceed admissible.upper"));
                }
            }
            AdmissibleSection::Unconstrained | AdmissibleSection::Zero => {}
        }
        self.optimizer.validate()?;
        self.solver.validate()?;
        if self.gradcheck.directions == 0 {
            return Err(Error::config("gradcheck.directions", "must be positive"));
        }
        if self.gradcheck.eps.is_empty() || self.gradcheck.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("gradcheck.eps", "needs at least one positive step"));
        }
        if self.energycheck.samples == 0 {
            return Err(Error::config("energycheck.samples", "must be positive"));
        }
        if self.run.threads == Some(0) {
            return Err(Error::config("run.threads", "must be positive when set"));
        }
        if self.sweep.alphas.is_empty() || self.sweep.alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("sweep.alphas", "must be non-empty and strictly increasing"));
        }
        let sup = self.sup_wall_speed()?;
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(**a > sup + 1.0)) {
            return Err(Error::config(
                "sweep.alphas",
                format!("every alpha must exceed ||b||_inf + 1 = {}, got {a}", sup + 1.0),
            ));
        }
        Ok(())
    }

    fn sup_wall_speed(&self) -> Result<f64> {
        let grid = self.build_grid()?;
        Ok(self.boundary_data(&grid).sup_norm())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let extent = (self.grid.extent[0], self.grid.extent[1]);
        let res = (self.grid.resolution[0], self.grid.resolution[1]);
        Grid::new(extent, res, self.grid.periodic_x)
    }

    fn context(&self, alpha: Option<f64>) -> PresetContext {
        PresetContext {
            lx: self.grid.extent[0],
            ly: self.grid.extent[1],
            mu: self.fluid.mu,
            alpha,
        }
    }

    fn alpha(&self) -> Option<f64> {
        match self.bc.kind {
            BcChoice::Slip => self.bc.alpha,
            BcChoice::Dirichlet => None,
        }
    }

    fn boundary_data(&self, grid: &Grid) -> BoundaryData {
        let ctx = self.context(self.alpha());
        BoundaryData::sample(grid, |x, y| self.bc.data.eval(&ctx, 0.0, x, y))
    }

    pub fn bc_spec(&self, grid: &Grid) -> Result<BcSpec> {
        let data = self.boundary_data(grid);
        match self.bc.kind {
            BcChoice::Dirichlet => Ok(BcSpec::dirichlet(data)),
            BcChoice::Slip => BcSpec::navier_slip(self.bc.alpha.unwrap_or(f64::NAN), data),
        }
    }

    /// Assembles the problem, recording the target trajectory when asked.
    pub fn build_problem(&self) -> Result<ProblemConfig> {
        let grid = self.build_grid()?;
        let time = TimeGrid::new(self.time.final_time, self.time.steps)?;
        let [x0, x1, y0, y1] = self.control.region;
        let mask = ControlMask::build(&grid, Rect::new(x0, x1, y0, y1))?;
        let ctx = self.context(self.alpha());
        let field = |p: &FieldPreset, t: f64| VelocityField::sample(&grid, |x, y| p.eval(&ctx, t, x, y));
        let cfg = ProblemConfig::new(&grid, time, self.bc_spec(&grid)?, FluidParams::new(self.fluid.mu)?, mask)?
            .with_solver(self.solver.clone())?
            .with_scheme(self.time.scheme)
            .with_cost_weight(self.cost.m)?
            .with_body_force(field(&self.body_force, 0.0))?
            .with_initial(field(&self.initial, 0.0))?;
        let target = match &self.target {
            TargetSection::Field { field: p } => (0..=time.steps()).map(|n| field(p, time.time(n))).collect(),
            TargetSection::Recorded { control, walls } => {
                let rec = match walls {
                    RecordWalls::Dirichlet => cfg.clone().with_bc(cfg.bc().as_dirichlet())?,
                    RecordWalls::Config => cfg.clone(),
                };
                let f = Control::sample(&rec, |t, x, y| control.eval(&ctx, t, x, y));
                solve_forward(&rec, &f)?.velocity
            }
        };
        cfg.with_target(target)
    }

    pub fn admissible_set(&self, cfg: &ProblemConfig) -> Result<AdmissibleSet> {
        let ctx = self.context(self.alpha());
        match &self.admissible {
            AdmissibleSection::Unconstrained => Ok(AdmissibleSet::Unconstrained),
            AdmissibleSection::Zero => Ok(AdmissibleSet::zero()),
            AdmissibleSection::Box { lower, upper } => AdmissibleSet::bounds(*lower, *upper),
            AdmissibleSection::Ball { radius, center } => {
                let c = Control::sample(cfg, |t, x, y| center.eval(&ctx, t, x, y));
                AdmissibleSet::ball(c, *radius)
            }
        }
    }

    /// Control of the gradient check.
    pub fn gradcheck_control(&self, cfg: &ProblemConfig) -> Control {
        let ctx = self.context(self.alpha());
        Control::sample(cfg, |t, x, y| self.gradcheck.at.eval(&ctx, t, x, y))
    }
}
