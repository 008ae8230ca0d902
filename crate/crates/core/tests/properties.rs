//! Invariants checked on random inputs.

use proptest::prelude::*;

use helecell::config::NewtonSettings;
use helecell::diagnostics::DiagnosticsRecord;
use helecell::io::{format_series, parse_series};
use helecell::model::smoothstep;
use helecell::solver::{run, step_explicit_upwind, step_semi_implicit, Problem};
use helecell::{Field, Grid1D, GrowthLaw, InitialProfile, PressureLaw, RunConfig, SimState};

fn grid() -> Grid1D {
    Grid1D::new(-2.0, 2.0, 80).unwrap()
}

/// Bump sums clamped at `cap`, zero near both ends.
fn density(cap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-1.0..1.0f64, 0.1..0.6f64, 0.05..1.0f64), 1..4).prop_map(move |bumps| {
        grid()
            .centers()
            .map(|x| {
                let v: f64 = bumps
                    .iter()
                    .map(|&(c, w, a)| a * smoothstep((w - (x - c).abs()) / (0.5 * w)))
                    .sum();
                v.min(cap)
            })
            .collect()
    })
}

fn singular_problem(epsilon: f64, growth: GrowthLaw) -> Problem {
    Problem::new(grid(), PressureLaw::singular(epsilon).unwrap(), growth)
}

fn state(values: Vec<f64>) -> SimState {
    SimState::new(0.0, Field::for_grid(&grid(), values).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pressure_round_trip(epsilon in 1e-3..2.0f64, n in 0.0..0.999f64) {
        let law = PressureLaw::singular(epsilon).unwrap();
        let back = law.density(law.pressure(n).unwrap()).unwrap();
        prop_assert!((back - n).abs() <= 1e-13, "{n} -> {back}");
    }

    #[test]
    fn growth_is_bounded(g in 0.0..50.0f64, p_max in 0.1..50.0f64, p in 0.0..100.0f64) {
        let growth = GrowthLaw::new(g, p_max).unwrap();
        let r = growth.rate(p);
        prop_assert!(r >= 0.0 && r <= growth.max_rate());
        prop_assert_eq!(growth.rate(p_max), 0.0);
    }

    #[test]
    fn cfl_scales_with_h_squared(n in 0.05..0.9f64) {
        let law = PressureLaw::singular(0.5).unwrap();
        let growth = GrowthLaw::none(10.0);
        let fine = Grid1D::new(0.0, 1.0, 200).unwrap();
        let coarse = Grid1D::new(0.0, 1.0, 100).unwrap();
        let dt = |grid: Grid1D| Problem::new(grid, law, growth)
            .cfl_dt(&SimState::new(0.0, Field::from_fn(&grid, |_| n)), 1.0);
        let ratio = dt(coarse) / dt(fine);
        prop_assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn explicit_step_keeps_bounds(values in density(10.0 / 10.5), epsilon in 0.05..1.0f64, safety in 0.1..1.0f64) {
        let growth = GrowthLaw::new(10.0, 10.0).unwrap();
        let problem = singular_problem(epsilon, growth);
        let ceiling = problem.density_ceiling();
        let values: Vec<f64> = values.into_iter().map(|v| v.min(ceiling)).collect();
        let mut s = state(values);
        for _ in 0..20 {
            let dt = problem.cfl_dt(&s, safety);
            s = step_explicit_upwind(&problem, &s, dt).unwrap().0;
            prop_assert!(s.n.min() >= 0.0);
            prop_assert!(s.n.max() <= ceiling + 1e-12, "max {} > {ceiling}", s.n.max());
        }
    }

    #[test]
    fn explicit_step_preserves_order(lower in density(0.6), extra in density(0.3), epsilon in 0.1..1.0f64) {
        let problem = singular_problem(epsilon, GrowthLaw::new(10.0, 10.0).unwrap());
        let ceiling = problem.density_ceiling();
        let upper: Vec<f64> = lower.iter().zip(&extra).map(|(a, b)| (a + b).min(ceiling)).collect();
        let (mut a, mut b) = (state(lower), state(upper));
        for _ in 0..20 {
            let dt = problem.cfl_dt(&a, 0.9).min(problem.cfl_dt(&b, 0.9));
            a = step_explicit_upwind(&problem, &a, dt).unwrap().0;
            b = step_explicit_upwind(&problem, &b, dt).unwrap().0;
            for (n, m) in a.n.values().iter().zip(b.n.values()) {
                prop_assert!(*n <= m + 1e-12, "{n} > {m}");
            }
        }
    }

    #[test]
    fn zero_growth_conserves_mass_and_tv(values in density(0.9), epsilon in 0.1..1.0f64) {
        let problem = singular_problem(epsilon, GrowthLaw::none(10.0));
        let g = grid();
        let mut s = state(values);
        let (m0, mut tv) = (s.n.integral(&g), s.n.total_variation());
        for _ in 0..20 {
            let dt = problem.cfl_dt(&s, 0.9);
            s = step_explicit_upwind(&problem, &s, dt).unwrap().0;
            prop_assert!((s.n.integral(&g) - m0).abs() <= 1e-12 * m0.max(1.0));
            let next = s.n.total_variation();
            prop_assert!(next <= tv + 1e-12, "TV grew {tv} -> {next}");
            tv = next;
        }
    }

    #[test]
    fn semi_implicit_conserves_mass_without_growth(values in density(0.9), dt in 1e-5..1e-3f64) {
        let problem = singular_problem(0.5, GrowthLaw::none(10.0));
        let g = grid();
        let s = state(values);
        let m0 = s.n.integral(&g);
        let (next, _) = step_semi_implicit(&problem, &s, dt, &NewtonSettings::default()).unwrap();
        prop_assert!((next.n.integral(&g) - m0).abs() <= 1e-11 * m0.max(1.0));
        prop_assert!(next.n.min() >= 0.0);
    }

    #[test]
    fn series_round_trip(rows in prop::collection::vec(
        (prop::array::uniform9(-1e3..1e3f64), prop::option::of(-1e3..1e3f64), prop::option::of(-1e3..1e3f64)),
        1..20,
    )) {
        let records: Vec<DiagnosticsRecord> = rows
            .into_iter()
            .map(|(v, entropy, ab)| DiagnosticsRecord {
                t: v[0],
                mass: v[1],
                max_n: v[2],
                max_p: v[3],
                support_radius: v[4],
                bv_seminorm: v[5],
                compl_residual_l1: v[6],
                state_law_gap: v[7],
                grad_p_l2_sq: v[8],
                entropy,
                ab_min_ratio: ab,
            })
            .collect();
        let text = format_series(&records);
        let parsed = parse_series(&text).unwrap();
        prop_assert_eq!(&parsed, &records);
        prop_assert_eq!(format_series(&parsed), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_are_deterministic(height in 0.2..0.9f64, half_width in 0.2..0.6f64) {
        let cfg = RunConfig {
            initial: InitialProfile::Plateau { height, half_width, smoothing_width: 0.1 },
            final_time: 0.002,
            snapshot_interval: 0.0005,
            grid: grid(),
            ..RunConfig::default()
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(a.snapshots, b.snapshots);
        prop_assert_eq!(cfg.hash(), cfg.clone().hash());
    }
}

#[test]
fn zero_final_time_gives_the_initial_state() {
    let cfg = RunConfig {
        final_time: 0.0,
        ..RunConfig::default()
    };
    let traj = run(&cfg).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.final_state(), &cfg.initial_state());
}

#[test]
fn vacuum_is_a_fixed_point() {
    let problem = singular_problem(0.5, GrowthLaw::new(10.0, 10.0).unwrap());
    let s = state(vec![0.0; 80]);
    let (a, _) = step_explicit_upwind(&problem, &s, 1e-3).unwrap();
    let (b, _) = step_semi_implicit(&problem, &s, 1e-3, &NewtonSettings::default()).unwrap();
    assert!(a.n.values().iter().chain(b.n.values()).all(|&v| v == 0.0));
}
