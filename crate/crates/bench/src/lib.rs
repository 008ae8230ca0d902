//! Fixtures shared by the benchmarks in `benches/`.

use helecell::solver::{ExplicitStepper, Problem};
use helecell::{RunConfig, SimState};

/// Default plateau on `[-4, 4]` with spacing `h`, advanced explicitly to
/// `t = 0.01` so the front has a developed profile.
pub fn developed_state(h: f64) -> (Problem, SimState) {
    let cfg = RunConfig::default().with_domain(4.0, h);
    let problem = Problem::from_config(&cfg);
    let mut stepper = ExplicitStepper::new(problem, cfg.initial_state()).expect("valid start");
    while stepper.time() < 0.01 {
        let dt = stepper.cfl_dt(cfg.cfl_safety);
        stepper.step(dt).expect("reference run stays admissible");
    }
    (problem, stepper.state())
}
