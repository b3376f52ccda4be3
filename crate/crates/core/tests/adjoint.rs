use navslip::adjoint::{cost_gradient, solve_adjoint, solve_adjoint_with_sources, solve_linearized};
use navslip::control::{cost_at, gradient_at, Control, ControlSpace};
use navslip::fields::{BoundaryData, VelocityField};
use navslip::forward::{solve_forward, BcSpec, FluidParams, ProblemConfig, TimeScheme};
use navslip::grid::{ControlMask, Grid, Rect, TimeGrid};
use navslip::linalg::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(slip: bool, scheme: TimeScheme) -> ProblemConfig {
    let g = Grid::build((1.0, 1.0), (10, 10)).unwrap();
    let mask = ControlMask::build(&g, Rect::new(0.2, 0.7, 0.3, 0.8)).unwrap();
    let data = BoundaryData::sample(&g, |x, _| [0.5 * x, 0.0]);
    let bc = if slip {
        BcSpec::navier_slip(20.0, data).unwrap()
    } else {
        BcSpec::dirichlet(data)
    };
    let a = VelocityField::sample(&g, |x, y| [(3.0 * y).sin() + x, (2.0 * x).cos()]);
    let base = ProblemConfig::new(&g, TimeGrid::new(0.2, 5).unwrap(), bc, FluidParams::new(0.05).unwrap(), mask)
        .unwrap()
        .with_scheme(scheme)
        .with_solver(SolverOptions {
            tol: 1e-12,
            ..Default::default()
        })
        .unwrap()
        .with_initial(a)
        .unwrap()
        .with_cost_weight(0.3)
        .unwrap();
    let target = (0..=5)
        .map(|n| VelocityField::sample(&g, |x, y| [0.2 * n as f64 * y, x - y]))
        .collect();
    base.with_target(target).unwrap()
}

fn random_control(cfg: &ProblemConfig, rng: &mut ChaCha8Rng, amp: f64) -> Control {
    let levels = (0..cfg.time().steps())
        .map(|_| VelocityField::from_values(cfg.grid(), (0..cfg.grid().n_velocity()).map(|_| rng.random_range(-amp..amp)).collect()).unwrap())
        .collect();
    Control::from_levels(cfg, levels).unwrap()
}

fn spacetime_pairing(cfg: &ProblemConfig, a: &[VelocityField], b: &[VelocityField]) -> f64 {
    let w = cfg.grid().velocity_weights();
    cfg.time().dt()
        * (1..a.len())
            .map(|n| {
                a[n].values()
                    .iter()
                    .zip(b[n].values())
                    .zip(w)
                    .map(|((x, y), w)| w * x * y)
                    .sum::<f64>()
            })
            .sum::<f64>()
}

#[test]
fn adjoint_is_the_exact_transpose_of_the_linearization() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (slip, scheme) in [
        (true, TimeScheme::ImplicitEuler),
        (false, TimeScheme::ImplicitEuler),
        (true, TimeScheme::CrankNicolson),
    ] {
        let cfg = problem(slip, scheme);
        let f = random_control(&cfg, &mut rng, 2.0);
        let state = solve_forward(&cfg, &f).unwrap();
        let space = ControlSpace::of(&cfg);
        for _ in 0..3 {
            let g = random_control(&cfg, &mut rng, 1.0);
            let sources: Vec<VelocityField> = (0..=cfg.time().steps())
                .map(|_| VelocityField::from_values(cfg.grid(), (0..cfg.grid().n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            let v = solve_linearized(&cfg, &state, &g).unwrap();
            let phi = solve_adjoint_with_sources(&cfg, &state, &sources).unwrap();
            let lhs = spacetime_pairing(&cfg, &sources, &v.velocity);
            let rhs = space.inner(&cost_gradient(&phi, &g.scaled(0.0), 0.0, cfg.mask()), &g);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "slip={slip} {scheme:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn linearized_state_is_linear_and_vanishes_for_zero_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = problem(true, TimeScheme::ImplicitEuler);
    let state = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
    let zero = solve_linearized(&cfg, &state, &Control::zeros_for(&cfg)).unwrap();
    assert!(zero.velocity.iter().all(|v| v.max_abs() == 0.0));
    let (g1, g2) = (random_control(&cfg, &mut rng, 1.0), random_control(&cfg, &mut rng, 1.0));
    let v1 = solve_linearized(&cfg, &state, &g1).unwrap();
    let v2 = solve_linearized(&cfg, &state, &g2).unwrap();
    let v12 = solve_linearized(&cfg, &state, &g1.axpy(1.0, &g2)).unwrap();
    for n in 0..v1.velocity.len() {
        let mut sum = v1.velocity[n].clone();
        sum.axpy(1.0, &v2.velocity[n]);
        assert!(sum.difference(&v12.velocity[n]).max_abs() < 1e-10);
    }
}

#[test]
fn linearization_is_the_directional_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = problem(true, TimeScheme::ImplicitEuler);
    let f = random_control(&cfg, &mut rng, 2.0);
    let g = random_control(&cfg, &mut rng, 1.0);
    let state = solve_forward(&cfg, &f).unwrap();
    let v = solve_linearized(&cfg, &state, &g).unwrap();
    let mut errs = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let pert = solve_forward(&cfg, &f.axpy(eps, &g)).unwrap();
        let err = (1..=cfg.time().steps())
            .map(|n| {
                let mut d = pert.velocity[n].difference(&state.velocity[n]);
                d.scale(1.0 / eps);
                d.difference(&v.velocity[n]).max_abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{errs:?}");
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for slip in [true, false] {
        let cfg = problem(slip, TimeScheme::ImplicitEuler);
        let space = ControlSpace::of(&cfg);
        let f = random_control(&cfg, &mut rng, 2.0);
        let (_, state) = cost_at(&cfg, &f).unwrap();
        let (grad, _) = gradient_at(&cfg, &f, &state).unwrap();
        let eps = 1e-4;
        for _ in 0..5 {
            let g = random_control(&cfg, &mut rng, 1.0);
            let dj = space.inner(&grad, &g);
            let jp = cost_at(&cfg, &f.axpy(eps, &g)).unwrap().0.total();
            let jm = cost_at(&cfg, &f.axpy(-eps, &g)).unwrap().0.total();
            let fd = (jp - jm) / (2.0 * eps);
            assert!(((dj - fd) / dj).abs() <= 1e-5, "slip={slip}: {dj} vs {fd}");
        }
    }
}

#[test]
fn attained_target_gives_zero_adjoint() {
    let cfg = problem(true, TimeScheme::ImplicitEuler);
    let f = Control::sample(&cfg, |t, x, _| [t, x]);
    let state = solve_forward(&cfg, &f).unwrap();
    let cfg = cfg.with_target(state.velocity.clone()).unwrap();
    let phi = solve_adjoint(&cfg, &state).unwrap();
    assert!(phi.velocity.iter().all(|p| p.max_abs() == 0.0));
    assert_eq!(phi.velocity.last().unwrap().max_abs(), 0.0);
    let grad = cost_gradient(&phi, &f, cfg.cost_weight(), cfg.mask());
    assert_eq!(grad, f.scaled(cfg.cost_weight()));
}

#[test]
fn adjoint_terminal_level_is_zero_and_levels_are_divergence_free() {
    let cfg = problem(false, TimeScheme::ImplicitEuler);
    let state = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
    let phi = solve_adjoint(&cfg, &state).unwrap();
    assert_eq!(phi.n_levels(), cfg.time().steps() + 1);
    assert_eq!(phi.velocity.last().unwrap().max_abs(), 0.0);
    for p in &phi.velocity {
        let d = navslip::fields::divergence(cfg.grid(), p);
        assert!(d.iter().all(|v| v.abs() < 1e-8));
    }
    assert!(phi.velocity[0].max_abs() > 0.0);
}
