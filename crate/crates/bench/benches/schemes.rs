use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use helecell::config::NewtonSettings;
use helecell::diagnostics::record;
use helecell::solver::{step_semi_implicit, ExplicitStepper};
use helecell_bench::developed_state;

const SPACINGS: [f64; 2] = [1.0 / 200.0, 1.0 / 400.0];

fn explicit_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("explicit_step");
    for h in SPACINGS {
        let (problem, state) = developed_state(h);
        group.bench_with_input(BenchmarkId::from_parameter(h), &state, |b, state| {
            b.iter_batched_ref(
                || ExplicitStepper::new(problem, state.clone()).unwrap(),
                |stepper| {
                    let dt = stepper.cfl_dt(0.9);
                    stepper.step(black_box(dt)).unwrap();
                },
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn semi_implicit_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("semi_implicit_step");
    let settings = NewtonSettings::default();
    for h in SPACINGS {
        let (problem, state) = developed_state(h);
        group.bench_with_input(BenchmarkId::from_parameter(h), &state, |b, state| {
            b.iter(|| step_semi_implicit(&problem, black_box(state), 1e-5, &settings).unwrap())
        });
    }
    group.finish();
}

fn diagnostics(c: &mut Criterion) {
    let mut group = c.benchmark_group("diagnostics_record");
    for h in SPACINGS {
        let (problem, state) = developed_state(h);
        group.bench_with_input(BenchmarkId::from_parameter(h), &state, |b, state| {
            b.iter(|| record(&problem, black_box(state), None))
        });
    }
    group.finish();
}

criterion_group!(benches, explicit_step, semi_implicit_step, diagnostics);
criterion_main!(benches);
