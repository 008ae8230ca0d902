use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::config::{Integrator, RunConfig};
use crate::diagnostics::DiagnosticsRecord;
use crate::hele_shaw::front_length_at;
use crate::model::{PressureLaw, SimState};
use crate::solver::{run, Trajectory};

pub const DEFAULT_EPSILONS: [f64; 4] = [0.5, 0.1, 0.02, 0.004];

/// AB ratios before this time are dominated by the initial layer and are
/// left out of the per-eps constant.
pub const AB_MIN_TIME: f64 = 0.01;

/// RK4 step for the reference front.
const FRONT_DT: f64 = 1e-5;

/// Shared setup of the sweep: reference constants on `[-6, 6]` with
/// `h = 1/200` up to `T = 0.1`.
///
/// The semi-implicit scheme is used because the explicit CFL bound scales
/// like `eps h^2 / P_M^2`, which is out of reach at `eps = 0.004`. Each run
/// further caps `dt` by its reaction bound.
pub fn sweep_config() -> RunConfig {
    RunConfig {
        final_time: 0.1,
        integrator: Integrator::SemiImplicit { dt: 1e-5 },
        snapshot_interval: 0.0025,
        ..RunConfig::default()
    }
    .with_domain(6.0, 1.0 / 200.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontErrorPoint {
    pub t: f64,
    pub support_radius: f64,
    /// Half length of the limit patch started from the initial support.
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub finals: Vec<DiagnosticsRecord>,
    pub final_states: Vec<SimState>,
    pub fronts: Vec<Vec<FrontErrorPoint>>,
    /// `h sum |n_k - n_{k+1}|` at the final time between consecutive eps.
    pub distances: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Front error at the final time, per eps.
    pub front_errors: Vec<f64>,
    /// `-min` of the AB ratio over snapshots with `t >= AB_MIN_TIME`.
    pub ab_constants: Vec<f64>,
    /// `eps * mass(T)`, the L1 norm of `(1 - n) p`.
    pub eps_mass: Vec<f64>,
    /// Largest `|(1 - n) p - eps n|` over all snapshots, per eps.
    pub state_law_gaps: Vec<f64>,
    pub steps: Vec<usize>,
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

impl SweepResult {
    pub fn residuals_decreasing(&self) -> bool {
        strictly_decreasing(&self.residuals)
    }

    pub fn distances_decreasing(&self) -> bool {
        strictly_decreasing(&self.distances)
    }

    pub fn front_errors_decreasing(&self) -> bool {
        strictly_decreasing(&self.front_errors)
    }

    /// Least-squares slope of `ln(eps mass)` against `ln eps`; 1 means the
    /// product vanishes linearly in `eps`.
    pub fn eps_mass_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .epsilons
            .iter()
            .zip(&self.eps_mass)
            .map(|(&e, &m)| (e.ln(), m.ln()))
            .collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    /// Ratio of the largest to the smallest AB constant in magnitude.
    pub fn ab_spread(&self) -> f64 {
        let max = self
            .ab_constants
            .iter()
            .map(|k| k.abs())
            .fold(0.0, f64::max);
        let min = self
            .ab_constants
            .iter()
            .map(|k| k.abs())
            .fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Runs `base` once per `eps` (singular law) and compares consecutive runs
/// and each run against the limit front.
pub fn epsilon_sweep(epsilons: &[f64], base: &RunConfig) -> Result<SweepResult, ExperimentError> {
    if epsilons.is_empty() {
        return Err(ExperimentError::InvalidInput("empty eps list".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0)) || !strictly_decreasing(epsilons) {
        return Err(ExperimentError::InvalidInput(format!(
            "eps list must be positive and strictly decreasing, got {epsilons:?}"
        )));
    }
    let runs: Vec<Trajectory> = epsilons
        .par_iter()
        .map(|&epsilon| {
            let cfg = RunConfig {
                law: PressureLaw::Singular { epsilon },
                ..base.clone()
            };
            run(&cfg).map_err(ExperimentError::run(format!("eps = {epsilon}")))
        })
        .collect::<Result<_, _>>()?;

    let grid = base.grid;
    let length0 = 2.0 * base.initial.support_radius();
    let fronts: Vec<Vec<FrontErrorPoint>> = runs
        .iter()
        .map(|traj| {
            traj.records()
                .map(|r| {
                    let reference = if r.t > 0.0 {
                        0.5 * front_length_at(length0, &base.growth, r.t, FRONT_DT)
                    } else {
                        0.5 * length0
                    };
                    FrontErrorPoint {
                        t: r.t,
                        support_radius: r.support_radius,
                        reference,
                        error: (r.support_radius - reference).abs(),
                    }
                })
                .collect()
        })
        .collect();
    let finals: Vec<DiagnosticsRecord> = runs.iter().map(|t| *t.final_record()).collect();
    let final_states: Vec<SimState> = runs.iter().map(|t| t.final_state().clone()).collect();
    let distances = final_states
        .windows(2)
        .map(|w| w[0].n.l1_distance(&w[1].n, &grid))
        .collect();
    let ab_constants = runs
        .iter()
        .map(|traj| {
            -traj
                .records()
                .filter(|r| r.t >= AB_MIN_TIME)
                .filter_map(|r| r.ab_min_ratio)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(SweepResult {
        epsilons: epsilons.to_vec(),
        residuals: finals.iter().map(|r| r.compl_residual_l1).collect(),
        front_errors: fronts
            .iter()
            .map(|f| f.last().map_or(0.0, |p| p.error))
            .collect(),
        eps_mass: epsilons
            .iter()
            .zip(&finals)
            .map(|(e, r)| e * r.mass)
            .collect(),
        state_law_gaps: runs
            .iter()
            .map(|t| t.records().map(|r| r.state_law_gap).fold(0.0, f64::max))
            .collect(),
        steps: runs.iter().map(|t| t.steps).collect(),
        finals,
        final_states,
        fronts,
        distances,
        ab_constants,
    })
}
