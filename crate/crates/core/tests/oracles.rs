//! Library values against independent reference computations.

mod common;

use common::*;
use helecell::config::NewtonSettings;
use helecell::experiments::{fig1_config, Manufactured};
use helecell::hele_shaw::{front_length_at, front_speed, patch_pressure};
use helecell::solver::{run, run_unbounded, step_explicit_upwind, step_semi_implicit, Problem};
use helecell::{Field, Grid1D, GrowthLaw, Integrator, PressureLaw, RunConfig, SimState};

fn fig1_growth() -> GrowthLaw {
    GrowthLaw::new(10.0, 10.0).unwrap()
}

#[test]
fn diffusivity_at_ceiling_is_the_slope_of_h() {
    let law = PressureLaw::singular(0.5).unwrap();
    let n = 10.0 / 10.5;
    let step = 1e-7;
    let fd = (singular_potential(0.5, n + step) - singular_potential(0.5, n - step)) / (2.0 * step);
    let d = law.diffusivity(n).unwrap();
    assert!((d - 210.0).abs() < 1e-9, "D = {d}");
    assert!(relative_error(fd, d) < 1e-6, "fd = {fd}, D = {d}");
}

#[test]
fn library_potential_matches_reference() {
    let law = PressureLaw::singular(0.5).unwrap();
    for n in [0.0, 0.1, 0.5, 0.9, 0.95] {
        let a = law.potential(n).unwrap();
        let b = singular_potential(0.5, n);
        assert!(
            (a - b).abs() <= 1e-12 * b.abs().max(1.0),
            "n = {n}: {a} vs {b}"
        );
    }
}

#[test]
fn cfl_at_the_ceiling() {
    let grid = Grid1D::new(0.0, 1.0, 100).unwrap();
    let problem = Problem::new(grid, PressureLaw::singular(0.5).unwrap(), fig1_growth());
    let state = SimState::new(0.0, Field::from_fn(&grid, |_| 10.0 / 10.5));
    let dt = problem.cfl_dt(&state, 1.0);
    assert!(relative_error(dt, 1e-4 / 420.0) < 1e-12, "dt = {dt}");
    assert!((dt - 2.380952380952e-7).abs() < 1e-18);
}

#[test]
fn three_cell_step_by_hand() {
    // p = (0, 1, 0); both interior faces carry 0.5 * 1 outward
    let grid = Grid1D::new(0.0, 3.0, 3).unwrap();
    let problem = Problem::new(
        grid,
        PressureLaw::singular(1.0).unwrap(),
        GrowthLaw::none(10.0),
    );
    let state = SimState::new(0.0, Field::for_grid(&grid, vec![0.0, 0.5, 0.0]).unwrap());
    let (next, report) = step_explicit_upwind(&problem, &state, 0.1).unwrap();
    let expected = [0.05, 0.4, 0.05];
    for (a, b) in next.n.values().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{:?}", next.n.values());
    }
    assert!((report.max_flux - 0.5).abs() < 1e-15);
    assert!((next.t - 0.1).abs() < 1e-15);
}

#[test]
fn uniform_state_reacts_only() {
    let grid = Grid1D::new(-1.0, 1.0, 40).unwrap();
    let law = PressureLaw::singular(0.5).unwrap();
    let problem = Problem::new(grid, law, fig1_growth());
    let c = 0.5;
    let state = SimState::new(0.0, Field::from_fn(&grid, |_| c));
    let dt = problem.cfl_dt(&state, 0.9);
    let (next, _) = step_explicit_upwind(&problem, &state, dt).unwrap();
    // P(0.5) = 0.5, G = 10 * 9.5
    let expected = c * (1.0 + dt * 95.0);
    assert!(next
        .n
        .values()
        .iter()
        .all(|&v| (v - expected).abs() < 1e-15));
}

#[test]
fn patch_pressure_matches_bvp() {
    let growth = fig1_growth();
    for length in [0.5, 1.0, 2.0] {
        for frac in [0.0, 0.25, 0.375] {
            let x = frac * length;
            let reference = bvp_value(length, 10.0, 10.0, 4000, x);
            let value = patch_pressure(length, &growth, x);
            assert!(
                (value - reference).abs() < 1e-8,
                "L = {length}, x = {x}: {value} vs {reference}"
            );
        }
    }
    let centre = 10.0 * (1.0 - 1.0 / (10f64.sqrt() / 2.0).cosh());
    assert!((patch_pressure(1.0, &growth, 0.0) - centre).abs() < 1e-13);
}

#[test]
fn front_speed_is_the_bvp_endpoint_slope() {
    let growth = fig1_growth();
    for length in [0.5, 1.0, 2.0] {
        let reference = bvp_endpoint_slope(length, 10.0, 10.0, 4000);
        let value = front_speed(length, &growth);
        assert!(
            (value - reference).abs() < 1e-6,
            "L = {length}: {value} vs {reference}"
        );
    }
}

#[test]
fn front_length_converges_to_closed_form() {
    let growth = fig1_growth();
    let exact = front_length_exact(1.0, 10.0, 10.0, 0.1);
    let coarse = front_length_at(1.0, &growth, 0.1, 2e-5);
    let fine = front_length_at(1.0, &growth, 0.1, 1e-5);
    // RK4: halving dt shrinks the error sixteenfold
    let richardson = (16.0 * fine - coarse) / 15.0;
    assert!((fine - coarse).abs() < 1e-9, "{coarse} vs {fine}");
    assert!(relative_error(fine, exact) < 1e-10, "{fine} vs {exact}");
    assert!(
        relative_error(richardson, exact) < 1e-12,
        "{richardson} vs {exact}"
    );
}

#[test]
fn manufactured_source_matches_finite_differences() {
    let law = PressureLaw::singular(0.5).unwrap();
    let growth = fig1_growth();
    let m = Manufactured::standard(law, growth);
    let (dt, dx) = (1e-5, 1e-3);
    for &(t, x) in &[(0.0, 0.0), (0.1, 1.3), (0.2, -2.7), (0.25, 3.9)] {
        assert!((m.density(t, x) - manufactured(t, x)).abs() < 1e-15);
        let n_t = (manufactured(t + dt, x) - manufactured(t - dt, x)) / (2.0 * dt);
        let h = |x: f64| singular_potential(0.5, manufactured(t, x));
        let h_xx = (h(x + dx) - 2.0 * h(x) + h(x - dx)) / (dx * dx);
        let n = manufactured(t, x);
        let reaction = n * 10.0 * (10.0 - 0.5 * n / (1.0 - n)).max(0.0);
        let reference = n_t - h_xx - reaction;
        let value = m.source(t, x);
        assert!(
            (value - reference).abs() < 1e-5 * (1.0 + reference.abs()),
            "(t, x) = ({t}, {x}): {value} vs {reference}"
        );
    }
}

#[test]
fn semi_implicit_step_tracks_explicit_step() {
    // one step on the default plateau at a small fraction of the CFL bound;
    // the schemes differ by O(dt h), so diff / (dt h) settles as h shrinks
    let ratios: Vec<f64> = [0.01, 0.005]
        .iter()
        .map(|&h| {
            let cfg = RunConfig::default().with_domain(4.0, h);
            let problem = Problem::from_config(&cfg);
            let state = cfg.initial_state();
            let dt = problem.cfl_dt(&state, 1.0) / 80.0;
            let (a, _) = step_explicit_upwind(&problem, &state, dt).unwrap();
            let (b, _) =
                step_semi_implicit(&problem, &state, dt, &NewtonSettings::default()).unwrap();
            a.n.l1_distance(&b.n, &cfg.grid) / (dt * h)
        })
        .collect();
    // baseline: 709 at h = 1/100, 799 at h = 1/200
    assert!(
        ratios.iter().all(|r| (600.0..1000.0).contains(r)),
        "ratios {ratios:?}"
    );
    assert!(
        relative_error(ratios[1], ratios[0]) < 0.2,
        "ratios {ratios:?}"
    );
}

#[test]
fn time_error_is_subdominant() {
    let m = Manufactured::standard(PressureLaw::singular(0.5).unwrap(), GrowthLaw::none(10.0));
    let errors: Vec<f64> = [0.5, 0.25]
        .iter()
        .map(|&safety| {
            let cfg = RunConfig {
                growth: GrowthLaw::none(10.0),
                final_time: 0.25,
                snapshot_interval: 0.25,
                entropy_stride: 1000,
                cfl_safety: safety,
                grid: Grid1D::with_spacing(-4.0, 4.0, 0.02).unwrap(),
                ..RunConfig::default()
            };
            let initial = SimState::new(0.0, Field::from_fn(&cfg.grid, |x| m.density(0.0, x)));
            let source = |t: f64, x: f64| m.source(t, x);
            let traj = run_unbounded(&cfg, initial, Some(&source)).unwrap();
            let exact = Field::from_fn(&cfg.grid, |x| m.density(traj.final_state().t, x));
            traj.final_state().n.l1_distance(&exact, &cfg.grid)
        })
        .collect();
    assert!(
        relative_error(errors[1], errors[0]) < 0.2,
        "errors {errors:?}"
    );
}

#[test]
fn fig1_at_short_time_agrees_across_schemes() {
    let explicit = RunConfig {
        final_time: 0.1,
        snapshot_interval: 0.1,
        entropy_stride: 1000,
        ..fig1_config()
    };
    let semi = RunConfig {
        integrator: Integrator::SemiImplicit { dt: 2e-6 },
        ..explicit.clone()
    };
    let a = *run(&explicit).unwrap().final_record();
    let b = *run(&semi).unwrap().final_record();
    // baseline at t = 0.1 (explicit): mass 6.2859, support radius 3.3625
    assert!((a.mass - 6.2859).abs() < 1e-3, "{a:?}");
    assert!((a.support_radius - 3.3625).abs() < 1e-9, "{a:?}");
    for (name, x, y) in [
        ("mass", a.mass, b.mass),
        ("max n", a.max_n, b.max_n),
        ("support radius", a.support_radius, b.support_radius),
    ] {
        assert!(
            relative_error(y, x) < 0.02,
            "{name}: explicit {x}, semi-implicit {y}"
        );
    }
}
