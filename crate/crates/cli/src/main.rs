//! `navslip` command-line driver.
//!
//! Flags override the matching config keys (flag > config file > built-in
//! default). Exit codes: 0 ok, 1 invalid input, 2 numerical failure,
//! 3 a checked threshold was exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use navslip::adjoint::{cost_gradient, solve_adjoint_with_sources, solve_linearized};
use navslip::config::{BcChoice, RunConfig};
use navslip::control::{cost_at, fixed_point_residual, gradient_at, optimize, sampled_vi, AdmissibleSet, Control, ControlSpace};
use navslip::fields::{l2_norm, BoundaryData, VelocityField};
use navslip::forward::{energy_report, solve_forward, BcSpec, ProblemConfig};
use navslip::io::{self, num};
use navslip::presets::{FieldPreset, PresetContext};
use navslip::sweep::{run_alpha_sweep, Metric};
use navslip::Error;

#[derive(Parser)]
#[command(name = "navslip", version, about = "Optimal control of 2D flows with Navier slip or no-slip walls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with zero control; writes checkpoints and a manifest.
    Solve(Common),
    /// Projected-gradient optimization; writes the iteration history.
    Optimize(Common),
    /// Optimize across the alpha ladder against the no-slip optimum.
    Sweep(Common),
    /// Adjoint gradient against central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of random directions (gradcheck.directions).
        #[arg(long)]
        directions: Option<usize>,
        /// Comma-separated difference steps (gradcheck.eps).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Energy balance over random divergence-free initial states.
    Energycheck {
        #[command(flatten)]
        common: Common,
        /// Number of random initial states (energycheck.samples).
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BcFlag {
    Dirichlet,
    Slip,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Wall condition (bc.kind).
    #[arg(long)]
    bc: Option<BcFlag>,
    /// Slip friction (bc.alpha).
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory (output.dir).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (run.threads).
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Core(Error),
    /// A solve finished but did not meet its stopping rule.
    Numerical(String),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::Config { .. } | Error::Parse(_) | Error::Io { .. } | Error::Shape(_)) => 1,
            Failure::Core(_) | Failure::Numerical(_) => 2,
            Failure::Threshold(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => {
                let mut msg = e.to_string();
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    msg.push_str(&format!(": {s}"));
                    src = s.source();
                }
                msg
            }
            Failure::Numerical(m) | Failure::Threshold(m) => m.clone(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve(c) => cmd_solve(&load(&c, |_| {})?),
        Command::Optimize(c) => cmd_optimize(&load(&c, |_| {})?),
        Command::Sweep(c) => cmd_sweep(&load(&c, |_| {})?),
        Command::Gradcheck { common, directions, eps } => cmd_gradcheck(&load(&common, |rc| {
            if let Some(d) = directions {
                rc.gradcheck.directions = d;
            }
            if let Some(e) = eps {
                rc.gradcheck.eps = e;
            }
        })?),
        Command::Energycheck { common, samples } => cmd_energycheck(&load(&common, |rc| {
            if let Some(s) = samples {
                rc.energycheck.samples = s;
            }
        })?),
    }
}

/// Reads the config, applies flag overrides, then validates the result.
fn load(c: &Common, extra: impl FnOnce(&mut RunConfig)) -> std::result::Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(&c.config).map_err(|source| Error::Io {
        path: c.config.display().to_string(),
        source,
    })?;
    let mut rc: RunConfig = toml_config(&text)?;
    if let Some(bc) = c.bc {
        rc.bc.kind = match bc {
            BcFlag::Dirichlet => BcChoice::Dirichlet,
            BcFlag::Slip => BcChoice::Slip,
        };
    }
    if let Some(a) = c.alpha {
        rc.bc.alpha = Some(a);
    }
    if let Some(dir) = &c.output {
        rc.output.dir = dir.clone();
    }
    if let Some(t) = c.threads {
        rc.run.threads = Some(t);
    }
    extra(&mut rc);
    rc.validate()?;
    if let Some(t) = rc.run.threads {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(rc)
}

fn toml_config(text: &str) -> navslip::Result<RunConfig> {
    // parse without validating: overrides may repair an invalid file value
    let rc: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(rc)
}

fn timestamp() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn entry(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn base_entries(command: &str, rc: &RunConfig, cfg: &ProblemConfig) -> Vec<(String, String)> {
    vec![
        entry("command", command),
        entry("bc", if cfg.bc().is_slip() { "slip" } else { "dirichlet" }),
        entry("alpha", cfg.bc().alpha().map_or("none".to_string(), num)),
        entry("grid", format!("{}x{}", cfg.grid().nx(), cfg.grid().ny())),
        entry("periodic_x", cfg.grid().is_periodic_x()),
        entry("final_time", num(cfg.time().final_time())),
        entry("steps", cfg.time().steps()),
        entry("scheme", format!("{:?}", cfg.scheme())),
        entry("mu", num(cfg.fluid().mu)),
        entry("m", num(cfg.cost_weight())),
        entry("solver", format!("{:?}", rc.solver.kind)),
        entry("solver_tol", num(rc.solver.tol)),
    ]
}

fn out_path(rc: &RunConfig, name: &str) -> PathBuf {
    rc.output.dir.join(name)
}

fn write(path: &Path, text: &str) -> Outcome {
    io::write_text(path, text)?;
    Ok(())
}

fn checkpoint_levels(n_levels: usize, every: usize) -> Vec<usize> {
    let last = n_levels - 1;
    let mut levels: Vec<usize> = if every == 0 { vec![0] } else { (0..=last).step_by(every).collect() };
    if levels.last() != Some(&last) {
        levels.push(last);
    }
    levels
}

/// Relative error of the final state against the slip/no-slip channel
/// profile, when the run is a body-force driven channel with resting walls.
fn channel_profile_error(rc: &RunConfig, cfg: &ProblemConfig, u: &VelocityField) -> Option<f64> {
    let FieldPreset::Constant { value: [g, gy] } = rc.body_force else {
        return None;
    };
    if !rc.grid.periodic_x || gy != 0.0 || g == 0.0 || !rc.bc.data.is_zero() {
        return None;
    }
    let ctx = PresetContext {
        lx: rc.grid.extent[0],
        ly: rc.grid.extent[1],
        mu: rc.fluid.mu,
        alpha: cfg.bc().alpha(),
    };
    let exact = VelocityField::sample(cfg.grid(), |x, y| FieldPreset::Poiseuille { gradient: g }.eval(&ctx, 0.0, x, y));
    Some(l2_norm(cfg.grid(), &u.difference(&exact)) / l2_norm(cfg.grid(), &exact))
}

fn cmd_solve(rc: &RunConfig) -> Outcome {
    let cfg = rc.build_problem()?;
    let traj = solve_forward(&cfg, &Control::zeros_for(&cfg))?;
    let grid = cfg.grid();
    for n in checkpoint_levels(traj.n_levels(), rc.output.checkpoint_every) {
        write(
            &out_path(rc, &format!("state_{n:04}.csv")),
            &io::field_csv(grid, &traj.velocity[n], Some(&traj.pressure[n])),
        )?;
    }
    let mut entries = base_entries("solve", rc, &cfg);
    entries.push(entry("final_kinetic_energy", num(0.5 * l2_norm(grid, traj.last()).powi(2))));
    entries.push(entry("max_divergence", num(traj.max_divergence(grid))));
    let profile = channel_profile_error(rc, &cfg, traj.last());
    if let Some(e) = profile {
        entries.push(entry("profile_rel_error", num(e)));
    }
    let steps = io::step_rows(grid, cfg.time(), &traj);
    write(&out_path(rc, "manifest.csv"), &io::manifest_csv(&entries, &steps, timestamp()))?;
    println!("solve: {} steps, max divergence {:.3e}", cfg.time().steps(), traj.max_divergence(grid));
    if let Some(e) = profile {
        println!("channel profile relative L2 error {e:.3e}");
    }
    Ok(())
}

fn cmd_optimize(rc: &RunConfig) -> Outcome {
    let cfg = rc.build_problem()?;
    let set = rc.admissible_set(&cfg)?;
    let space = ControlSpace::of(&cfg);
    let res = optimize(&cfg, &set, &rc.optimizer)?;
    write(&out_path(rc, "history.csv"), &io::history_csv(&res.history))?;
    let last = res.control.n_levels() - 1;
    write(&out_path(rc, "control_last.csv"), &io::field_csv(cfg.grid(), res.control.level(last), None))?;
    let n = res.state.n_levels() - 1;
    write(
        &out_path(rc, &format!("state_{n:04}.csv")),
        &io::field_csv(cfg.grid(), res.state.last(), Some(&res.state.pressure[n])),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(rc.gradcheck.seed);
    let vi = sampled_vi(&res.control, &res.gradient, cfg.cost_weight(), &set, &space, 100, &mut rng);
    let fp = fixed_point_residual(&res.control, &res.adjoint, cfg.cost_weight(), &set, &space);
    let j0 = res.history[0].cost;
    let mut entries = base_entries("optimize", rc, &cfg);
    entries.extend([
        entry("termination", format!("{:?}", res.termination)),
        entry("iterations", res.history.len() - 1),
        entry("cost_initial", num(j0)),
        entry("cost_final", num(res.cost.total())),
        entry("tracking", num(res.cost.tracking)),
        entry("regularization", num(res.cost.regularization)),
        entry("stationarity", num(res.stationarity)),
        entry("fixed_point_residual", num(fp)),
        entry("sampled_vi_min", num(vi)),
        entry("control_norm", num(space.norm(&res.control))),
    ]);
    write(&out_path(rc, "manifest.csv"), &io::manifest_csv(&entries, &[], timestamp()))?;
    println!(
        "optimize: {:?} after {} iterations, J {:.6e} -> {:.6e}, stationarity {:.3e}",
        res.termination,
        res.history.len() - 1,
        j0,
        res.cost.total(),
        res.stationarity
    );
    if !res.converged() {
        return Err(Failure::Numerical(format!(
            "optimizer stopped with {:?}, stationarity {:.3e} > tol {:.3e}",
            res.termination, res.stationarity, rc.optimizer.tol
        )));
    }
    Ok(())
}

fn cmd_sweep(rc: &RunConfig) -> Outcome {
    let cfg = rc.build_problem()?;
    let set = rc.admissible_set(&cfg)?;
    let report = run_alpha_sweep(&cfg, &set, &rc.optimizer, &rc.sweep)?;
    write(&out_path(rc, "sweep.csv"), &io::sweep_csv(&report))?;
    let alphas = report.alphas();
    let mut entries = base_entries("sweep", rc, &cfg);
    entries.push(entry("reference_cost", num(report.reference.cost.total())));
    entries.push(entry("reference_termination", format!("{:?}", report.reference.termination)));
    for m in Metric::ALL {
        let slope = report.slope(m);
        let trend = report.trend(m, 0.05);
        write(
            &out_path(rc, &format!("{}.svg", m.name())),
            &io::loglog_svg(m.label(), &alphas, &report.column(m), slope),
        )?;
        entries.push(entry(&format!("slope_{}", m.name()), slope.map_or("nan".to_string(), num)));
        entries.push(entry(&format!("decreasing_{}", m.name()), trend.nonincreasing));
        entries.push(entry(&format!("ratio_{}", m.name()), num(trend.ratio)));
        println!(
            "{:<28} slope {:>8}  decreasing {:<5}  last/first {:.3e}",
            m.name(),
            slope.map_or("n/a".to_string(), |s| format!("{s:.3}")),
            trend.nonincreasing,
            trend.ratio
        );
    }
    write(&out_path(rc, "manifest.csv"), &io::manifest_csv(&entries, &[], timestamp()))?;
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("{}{}", r.alpha, r.failure.as_deref().map(|f| format!(" ({f})")).unwrap_or_default()))
        .collect();
    if !report.reference.converged() {
        return Err(Failure::Numerical("no-slip reference optimization did not converge".into()));
    }
    if !failed.is_empty() {
        return Err(Failure::Numerical(format!("sweep rows did not converge: alpha = {}", failed.join(", "))));
    }
    Ok(())
}

fn random_direction(cfg: &ProblemConfig, space: &ControlSpace, rng: &mut ChaCha8Rng) -> Control {
    AdmissibleSet::Unconstrained.sample(space, &Control::zeros_for(cfg), 1.0, rng)
}

fn cmd_gradcheck(rc: &RunConfig) -> Outcome {
    let cfg = rc.build_problem()?;
    let space = ControlSpace::of(&cfg);
    let f = rc.gradcheck_control(&cfg);
    let (_, state) = cost_at(&cfg, &f)?;
    let (grad, _) = gradient_at(&cfg, &f, &state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rc.gradcheck.seed);

    let directions: Vec<Control> = (0..rc.gradcheck.directions).map(|_| random_direction(&cfg, &space, &mut rng)).collect();
    let mut csv = String::from("direction,eps,adjoint,finite_difference,rel_error\n");
    let mut best = vec![f64::INFINITY; directions.len()];
    for &eps in &rc.gradcheck.eps {
        for (k, g) in directions.iter().enumerate() {
            let dj = space.inner(&grad, g);
            let jp = cost_at(&cfg, &f.axpy(eps, g))?.0.total();
            let jm = cost_at(&cfg, &f.axpy(-eps, g))?.0.total();
            let fd = (jp - jm) / (2.0 * eps);
            let rel = (dj - fd).abs() / dj.abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            best[k] = best[k].min(rel);
            csv.push_str(&format!("{k},{},{},{},{}\n", num(eps), num(dj), num(fd), num(rel)));
            println!("direction {k} eps {eps:.1e}: adjoint {dj:.10e} fd {fd:.10e} rel {rel:.3e}");
        }
    }

    // duality between the linearized state and the adjoint with random sources
    let g = random_direction(&cfg, &space, &mut rng);
    let w = cfg.grid().velocity_weights();
    let sources: Vec<VelocityField> = (0..=cfg.time().steps())
        .map(|_| {
            let v = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            VelocityField::from_values(cfg.grid(), v)
        })
        .collect::<navslip::Result<_>>()?;
    let v = solve_linearized(&cfg, &state, &g)?;
    let phi = solve_adjoint_with_sources(&cfg, &state, &sources)?;
    let lhs: f64 = cfg.time().dt()
        * (1..sources.len())
            .map(|n| {
                sources[n].values().iter().zip(v.velocity[n].values()).zip(w).map(|((a, b), w)| w * a * b).sum::<f64>()
            })
            .sum::<f64>();
    let rhs = space.inner(&cost_gradient(&phi, &f.scaled(0.0), 0.0, cfg.mask()), &g);
    let duality = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    csv.push_str(&format!("duality,,{},{},{}\n", num(rhs), num(lhs), num(duality)));
    println!("duality rel {duality:.3e}");
    write(&out_path(rc, "gradcheck.csv"), &csv)?;

    let threshold = rc.gradcheck.threshold;
    let bad: Vec<String> = best
        .iter()
        .enumerate()
        .filter(|(_, e)| !(**e <= threshold))
        .map(|(k, e)| format!("direction {k} ({e:.3e})"))
        .collect();
    if !bad.is_empty() {
        return Err(Failure::Threshold(format!(
            "gradient check above threshold {threshold:.1e}: {}",
            bad.join(", ")
        )));
    }
    if !(duality <= 1e-10) {
        return Err(Failure::Threshold(format!("duality identity off by {duality:.3e} (> 1e-10)")));
    }
    Ok(())
}

fn cmd_energycheck(rc: &RunConfig) -> Outcome {
    let base = rc.build_problem()?;
    let grid = base.grid().clone();
    let bc = match base.bc().alpha() {
        Some(a) => BcSpec::navier_slip(a, BoundaryData::zero(&grid))?,
        None => BcSpec::dirichlet(BoundaryData::zero(&grid)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rc.energycheck.seed);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for sample in 0..rc.energycheck.samples {
        let a = VelocityField::from_values(&grid, (0..grid.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let cfg = ProblemConfig::new(&grid, *base.time(), bc.clone(), base.fluid(), base.mask().clone())?
            .with_solver(base.solver().clone())?
            .with_scheme(base.scheme())
            .with_initial(a)?;
        let traj = solve_forward(&cfg, &Control::zeros_for(&cfg))?;
        for e in energy_report(&cfg, &traj) {
            worst = worst.max(e.relative_slack());
            rows.push((sample, e));
        }
    }
    write(&out_path(rc, "energy.csv"), &io::energy_csv(&rows))?;
    println!("energycheck: {} samples, worst relative slack {worst:.3e}", rc.energycheck.samples);
    if !(worst <= rc.energycheck.slack) {
        return Err(Failure::Threshold(format!(
            "energy inequality violated: relative slack {worst:.3e} > {:.1e}",
            rc.energycheck.slack
        )));
    }
    Ok(())
}
