use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::config::RunConfig;
use crate::model::{smoothstep, Field, Grid1D, SimState};
use crate::solver::{ExplicitStepper, Problem};

/// Allowed `n - m` before a cell counts as a violation.
pub const COMPARISON_TOLERANCE: f64 = 1e-10;

/// Reference constants on `[-4, 4]`, `h = 1/200`, up to `T = 0.02`.
pub fn comparison_config() -> RunConfig {
    RunConfig {
        final_time: 0.02,
        ..RunConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub pair: usize,
    pub t: f64,
    pub cell: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub pair: usize,
    pub steps: usize,
    /// Smallest `m - n` seen over all cells and steps.
    pub min_gap: f64,
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub pairs: Vec<PairOutcome>,
    pub first_violation: Option<Violation>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Sum of one to three smoothstep bumps with random centres, widths and
/// heights, support inside `|x| < 1.6`.
fn bumps(rng: &mut ChaCha8Rng, max_count: usize, heights: (f64, f64)) -> Vec<(f64, f64, f64, f64)> {
    let count = rng.gen_range(1..=max_count);
    (0..count)
        .map(|_| {
            let centre = rng.gen_range(-1.0..1.0);
            let half_width = rng.gen_range(0.2..0.6);
            let smoothing = half_width * rng.gen_range(0.1..1.0);
            let height = rng.gen_range(heights.0..heights.1);
            (centre, half_width, smoothing, height)
        })
        .collect()
}

fn bump_sum(spec: &[(f64, f64, f64, f64)], x: f64) -> f64 {
    spec.iter()
        .map(|&(c, w, s, a)| a * smoothstep((w - (x - c).abs()) / s))
        .sum()
}

/// Ordered pair `n0 <= m0`: `n0` is a bump sum and `m0 = n0 + bump`, both
/// clamped at `ceiling`.
pub fn random_pair(rng: &mut ChaCha8Rng, grid: &Grid1D, ceiling: f64) -> (Field, Field) {
    let base = bumps(rng, 3, (0.1, 0.6));
    let extra = bumps(rng, 1, (0.05, 0.3));
    let lower = Field::from_fn(grid, |x| bump_sum(&base, x).min(ceiling));
    let upper = Field::from_fn(grid, |x| {
        (bump_sum(&base, x).min(ceiling) + bump_sum(&extra, x)).min(ceiling)
    });
    (lower, upper)
}

/// Evolves both states with the explicit scheme under the shared step
/// `min` of the two CFL bounds and checks `n <= m + 1e-10` cellwise after
/// every step.
pub fn check_pair(
    problem: &Problem,
    pair: usize,
    lower: SimState,
    upper: SimState,
    final_time: f64,
    safety: f64,
) -> Result<PairOutcome, ExperimentError> {
    let label = || format!("pair {pair}");
    let mut a = ExplicitStepper::new(*problem, lower).map_err(ExperimentError::run(label()))?;
    let mut b = ExplicitStepper::new(*problem, upper).map_err(ExperimentError::run(label()))?;
    let end = a.time() + final_time;
    let mut steps = 0;
    let mut min_gap = f64::INFINITY;
    let mut check = |a: &ExplicitStepper, b: &ExplicitStepper| -> Option<Violation> {
        let (n, m) = (a.density(), b.density());
        let Some((lo, hi)) = hull(a.support(), b.support()) else {
            min_gap = min_gap.min(0.0);
            return None;
        };
        let mut found = None;
        for i in lo..=hi {
            let gap = m[i] - n[i];
            min_gap = min_gap.min(gap);
            if gap < -COMPARISON_TOLERANCE && found.is_none() {
                found = Some(Violation {
                    pair,
                    t: a.time(),
                    cell: i,
                    lower: n[i],
                    upper: m[i],
                });
            }
        }
        found
    };
    if let Some(v) = check(&a, &b) {
        return Ok(PairOutcome {
            pair,
            steps,
            min_gap,
            violation: Some(v),
        });
    }
    while a.time() < end {
        let mut dt = a.cfl_dt(safety).min(b.cfl_dt(safety));
        if a.time() + dt >= end {
            dt = end - a.time();
        }
        a.step(dt).map_err(ExperimentError::run(label()))?;
        b.step(dt).map_err(ExperimentError::run(label()))?;
        steps += 1;
        if let Some(v) = check(&a, &b) {
            return Ok(PairOutcome {
                pair,
                steps,
                min_gap,
                violation: Some(v),
            });
        }
    }
    Ok(PairOutcome {
        pair,
        steps,
        min_gap,
        violation: None,
    })
}

fn hull(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> Option<(usize, usize)> {
    match (a, b) {
        (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Draws `num_pairs` ordered pairs from a ChaCha8 stream seeded with `seed`
/// and checks each one with [`check_pair`] over `base.final_time`.
pub fn comparison_harness(
    num_pairs: usize,
    seed: u64,
    base: &RunConfig,
) -> Result<ComparisonReport, ExperimentError> {
    if num_pairs == 0 {
        return Err(ExperimentError::InvalidInput(
            "num_pairs must be at least 1".into(),
        ));
    }
    base.validate_parameters()?;
    let problem = Problem::from_config(base);
    let ceiling = problem.density_ceiling();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // drawn up front so the pair set does not depend on scheduling
    let pairs: Vec<(Field, Field)> = (0..num_pairs)
        .map(|_| random_pair(&mut rng, &problem.grid, ceiling))
        .collect();
    let outcomes: Vec<PairOutcome> = pairs
        .into_par_iter()
        .enumerate()
        .map(|(k, (lower, upper))| {
            check_pair(
                &problem,
                k,
                SimState::new(0.0, lower),
                SimState::new(0.0, upper),
                base.final_time,
                base.cfl_safety,
            )
        })
        .collect::<Result<_, _>>()?;
    let first_violation = outcomes.iter().find_map(|o| o.violation);
    Ok(ComparisonReport {
        seed,
        pairs: outcomes,
        first_violation,
    })
}
