use navslip::control::Control;
use navslip::fields::{l2_norm, spacetime_l2, BoundaryData, VelocityField};
use navslip::forward::{advance_step, energy_report, solve_forward, solve_steady_stokes, BcSpec, FluidParams, ProblemConfig};
use navslip::grid::{ControlMask, Grid, Rect, TimeGrid};
use navslip::linalg::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn body(grid: &Grid, g: f64) -> VelocityField {
    VelocityField::sample(grid, |_, _| [g, 0.0])
}

/// Relative L2 error of the x-velocity against `U(y)` over interior faces.
fn profile_error(grid: &Grid, u: &VelocityField, exact: impl Fn(f64) -> f64) -> f64 {
    let w = grid.velocity_weights();
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..grid.n_velocity() {
        if w[s] == 0.0 {
            continue;
        }
        let [_, y] = grid.slot_position(s);
        let e = match grid.slot_component(s) {
            navslip::grid::Component::X => exact(y),
            navslip::grid::Component::Y => 0.0,
        };
        num += w[s] * (u.values()[s] - e).powi(2);
        den += w[s] * e * e;
    }
    (num / den).sqrt()
}

fn slip_profile(alpha: f64) -> impl Fn(f64) -> f64 {
    move |y| y * (1.0 - y) / 2.0 + 1.0 / (2.0 * alpha)
}

#[test]
fn slip_poiseuille_matches_closed_form_with_second_order() {
    for alpha in [10.0, 100.0] {
        let mut errors = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::build_channel((1.0, 1.0), (n, n)).unwrap();
            let bc = BcSpec::navier_slip(alpha, BoundaryData::zero(&g)).unwrap();
            let sol = solve_steady_stokes(&g, &bc, FluidParams::new(1.0).unwrap(), &body(&g, 1.0), &SolverOptions::default()).unwrap();
            errors.push(profile_error(&g, &sol.velocity, slip_profile(alpha)));
        }
        assert!(errors[2] <= 1e-3, "alpha {alpha}: {errors:?}");
        let order = (errors[0] / errors[2]).log2() / 2.0;
        assert!(order >= 1.9, "alpha {alpha}: order {order}, {errors:?}");
    }
}

#[test]
fn no_slip_poiseuille_matches_closed_form() {
    let g = Grid::build_channel((1.0, 1.0), (8, 32)).unwrap();
    let bc = BcSpec::dirichlet(BoundaryData::zero(&g));
    let sol = solve_steady_stokes(&g, &bc, FluidParams::new(1.0).unwrap(), &body(&g, 1.0), &SolverOptions::default()).unwrap();
    let err = profile_error(&g, &sol.velocity, |y| y * (1.0 - y) / 2.0);
    assert!(err < 2e-3, "{err}");
}

#[test]
fn zero_forcing_gives_zero_flow() {
    let g = Grid::build((1.0, 1.0), (8, 8)).unwrap();
    let bc = BcSpec::navier_slip(10.0, BoundaryData::zero(&g)).unwrap();
    let sol = solve_steady_stokes(&g, &bc, FluidParams::new(1.0).unwrap(), &body(&g, 0.0), &SolverOptions::default()).unwrap();
    assert_eq!(sol.velocity.max_abs(), 0.0);
}

fn channel_problem(n: (usize, usize), alpha: f64, time: TimeGrid) -> ProblemConfig {
    let g = Grid::build_channel((1.0, 1.0), n).unwrap();
    let mask = ControlMask::build(&g, Rect::new(0.25, 0.75, 0.25, 0.75)).unwrap();
    let bc = BcSpec::navier_slip(alpha, BoundaryData::zero(&g)).unwrap();
    ProblemConfig::new(&g, time, bc, FluidParams::new(1.0).unwrap(), mask)
        .unwrap()
        .with_body_force(body(&g, 1.0))
        .unwrap()
}

#[test]
fn steady_slip_profile_is_a_fixed_point_of_the_step() {
    let cfg = channel_problem((8, 16), 10.0, TimeGrid::new(1.0, 4).unwrap());
    let steady = solve_steady_stokes(cfg.grid(), cfg.bc(), cfg.fluid(), cfg.body_force(), cfg.solver()).unwrap();
    let cfg = cfg.with_initial(steady.velocity.clone()).unwrap();
    let next = advance_step(cfg.initial(), &cfg, 1, None).unwrap();
    let diff = next.velocity.difference(&steady.velocity).max_abs();
    assert!(diff <= 1e-10 * steady.velocity.max_abs(), "{diff}");
}

#[test]
fn transient_channel_flow_reaches_the_steady_profile() {
    let cfg = channel_problem((4, 16), 10.0, TimeGrid::new(10.0, 40).unwrap());
    let traj = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
    let steady = solve_steady_stokes(cfg.grid(), cfg.bc(), cfg.fluid(), cfg.body_force(), cfg.solver()).unwrap();
    let diff = traj.last().difference(&steady.velocity).max_abs();
    assert!(diff < 1e-6, "{diff}");
    assert!(profile_error(cfg.grid(), traj.last(), slip_profile(10.0)) < 5e-3);
}

fn random_box_problem(seed: u64, slip: bool, grid_n: usize, time: TimeGrid) -> ProblemConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::build((1.0, 1.0), (grid_n, grid_n)).unwrap();
    let mask = ControlMask::build(&g, Rect::new(0.25, 0.75, 0.25, 0.75)).unwrap();
    let bc = if slip {
        BcSpec::navier_slip(rng.random_range(2.0..50.0), BoundaryData::zero(&g)).unwrap()
    } else {
        BcSpec::dirichlet(BoundaryData::zero(&g))
    };
    let a = VelocityField::from_values(&g, (0..g.n_velocity()).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    ProblemConfig::new(&g, time, bc, FluidParams::new(rng.random_range(0.01..1.0)).unwrap(), mask)
        .unwrap()
        .with_initial(a)
        .unwrap()
}

#[test]
fn energy_inequality_holds_every_step() {
    for seed in 0..6 {
        let cfg = random_box_problem(seed, seed % 2 == 0, 12, TimeGrid::new(0.2, 8).unwrap());
        let traj = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
        for e in energy_report(&cfg, &traj) {
            assert!(e.relative_slack() <= 1e-12, "seed {seed}: {e:?}");
            assert!(e.kinetic_new <= e.kinetic_old * (1.0 + 1e-12));
        }
        assert!(traj.max_divergence(cfg.grid()) < 1e-8);
    }
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let g = Grid::build((1.0, 1.0), (8, 8)).unwrap();
    let mask = ControlMask::build(&g, Rect::new(0.25, 0.75, 0.25, 0.75)).unwrap();
    for bc in [BcSpec::dirichlet(BoundaryData::zero(&g)), BcSpec::navier_slip(5.0, BoundaryData::zero(&g)).unwrap()] {
        let cfg = ProblemConfig::new(&g, TimeGrid::new(0.1, 3).unwrap(), bc, FluidParams::new(1.0).unwrap(), mask.clone()).unwrap();
        let traj = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
        assert_eq!(traj.n_levels(), 4);
        assert!(traj.velocity.iter().all(|u| u.max_abs() == 0.0));
    }
}

#[test]
fn large_friction_approaches_no_slip() {
    let time = TimeGrid::new(0.1, 5).unwrap();
    let slip = random_box_problem(42, true, 12, time);
    let slip = slip.clone().with_bc(slip.bc().with_alpha(1e8).unwrap()).unwrap();
    let noslip = slip.clone().with_bc(slip.bc().as_dirichlet()).unwrap();
    let f = Control::sample(&slip, |t, x, y| [5.0 * (t + y), -3.0 * x]);
    let a = solve_forward(&slip, &f).unwrap();
    let b = solve_forward(&noslip, &f).unwrap();
    let diff: Vec<VelocityField> = a.velocity[1..].iter().zip(&b.velocity[1..]).map(|(x, y)| x.difference(y)).collect();
    let rel = spacetime_l2(slip.grid(), &diff, time.dt()) / spacetime_l2(slip.grid(), &b.velocity[1..], time.dt());
    assert!(rel < 1e-5, "{rel}");
}

#[test]
fn control_drives_the_flow_only_through_the_region() {
    let cfg = random_box_problem(3, true, 10, TimeGrid::new(0.1, 2).unwrap());
    let f = Control::sample(&cfg, |_, _, _| [1.0, 1.0]);
    for (s, v) in f.level(0).values().iter().enumerate() {
        assert_eq!(*v != 0.0, cfg.mask().contains(s));
    }
    let a = solve_forward(&cfg, &f).unwrap();
    let b = solve_forward(&cfg, &Control::zeros_for(&cfg)).unwrap();
    assert!(l2_norm(cfg.grid(), &a.last().difference(b.last())) > 1e-3);
}
