use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::config::{Integrator, RunConfig};
use crate::model::{Field, Grid1D, GrowthLaw, PressureLaw, SimState};
use crate::solver::run_unbounded;

/// `n*(t, x) = base + amplitude e^(-t) cos(k x)` with `S` chosen so that
/// `n*` solves `d_t n - (H(n))_xx = n G(P(n)) + S` exactly.
///
/// With `k = pi/4` on `[-4, 4]` the slope vanishes at both ends, matching
/// the no-flux boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Manufactured {
    pub base: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
    pub law: PressureLaw,
    pub growth: GrowthLaw,
}

impl Manufactured {
    pub fn standard(law: PressureLaw, growth: GrowthLaw) -> Self {
        Self {
            base: 0.5,
            amplitude: 0.3,
            wavenumber: PI / 4.0,
            law,
            growth,
        }
    }

    pub fn density(&self, t: f64, x: f64) -> f64 {
        self.base + self.amplitude * (-t).exp() * (self.wavenumber * x).cos()
    }

    pub fn source(&self, t: f64, x: f64) -> f64 {
        let k = self.wavenumber;
        let a = self.amplitude * (-t).exp();
        let (sin, cos) = (k * x).sin_cos();
        let n = self.base + a * cos;
        let n_t = -a * cos;
        let n_x = -a * k * sin;
        let n_xx = -a * k * k * cos;
        let h_xx = self.law.diffusivity_unchecked(n) * n_xx
            + self.law.diffusivity_slope_unchecked(n) * n_x * n_x;
        n_t - h_xx - n * self.growth.rate(self.law.pressure_unchecked(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum StudyScheme {
    Explicit,
    /// Semi-implicit with `dt = courant * h`, which keeps the time error
    /// first order as `h` is refined.
    SemiImplicit {
        courant: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error_l1: f64,
    /// `log2(e_coarser / e_h) / log2(h_coarser / h)`; absent on the first row.
    pub order: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub scheme: StudyScheme,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Observed order on the finest pair of levels.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

/// `[-4, 4]`, `eps = 0.5`, no growth, up to `T = 0.25`.
///
/// Growth is switched off because the reference growth law makes the
/// manufactured state unstable: around `n = 0.5` the reaction `n G(P(n))`
/// linearises to a rate of about +85, which amplifies any truncation error
/// by `e^21` before `T` and the discrete solution leaves `n*` altogether.
pub fn convergence_config() -> RunConfig {
    RunConfig {
        growth: GrowthLaw::none(crate::config::DEFAULT_P_HOMEOSTATIC),
        final_time: 0.25,
        snapshot_interval: 0.25,
        entropy_stride: 1000,
        ..RunConfig::default()
    }
}

/// L1 errors against `solution` at `base.final_time` for each spacing in
/// `spacings` (coarse to fine, constant ratio, at least three levels).
/// The domain of `base` is kept; only the cell count changes.
pub fn convergence_study(
    spacings: &[f64],
    base: &RunConfig,
    solution: &Manufactured,
    scheme: StudyScheme,
) -> Result<ConvergenceTable, ExperimentError> {
    if spacings.len() < 3 {
        return Err(ExperimentError::InvalidInput(
            "a convergence study needs at least three levels".into(),
        ));
    }
    let ratio = spacings[0] / spacings[1];
    let geometric = spacings
        .windows(2)
        .all(|w| w[1] > 0.0 && ((w[0] / w[1]) / ratio - 1.0).abs() < 1e-9);
    if !(ratio > 1.0) || !geometric {
        return Err(ExperimentError::InvalidInput(format!(
            "spacings must be a decreasing geometric ladder, got {spacings:?}"
        )));
    }
    let levels: Vec<(f64, usize)> = spacings
        .par_iter()
        .map(|&h| {
            let mut cfg = base.clone();
            cfg.grid = Grid1D::with_spacing(base.grid.x_min(), base.grid.x_max(), h)
                .map_err(|e| ExperimentError::InvalidInput(e.to_string()))?;
            cfg.law = solution.law;
            cfg.growth = solution.growth;
            cfg.snapshot_interval = base.final_time.max(f64::MIN_POSITIVE);
            cfg.integrator = match scheme {
                StudyScheme::Explicit => Integrator::ExplicitUpwind,
                StudyScheme::SemiImplicit { courant } => {
                    Integrator::SemiImplicit { dt: courant * h }
                }
            };
            let initial =
                SimState::new(0.0, Field::from_fn(&cfg.grid, |x| solution.density(0.0, x)));
            let source = |t: f64, x: f64| solution.source(t, x);
            let traj = run_unbounded(&cfg, initial, Some(&source))
                .map_err(ExperimentError::run(format!("h = {h}")))?;
            let exact = Field::from_fn(&cfg.grid, |x| solution.density(traj.final_state().t, x));
            Ok((
                traj.final_state().n.l1_distance(&exact, &cfg.grid),
                traj.steps,
            ))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let rows = levels
        .iter()
        .enumerate()
        .map(|(k, &(error_l1, steps))| ConvergenceRow {
            h: spacings[k],
            error_l1,
            order: (k > 0).then(|| (levels[k - 1].0 / error_l1).log2() / ratio.log2()),
            steps,
        })
        .collect();
    Ok(ConvergenceTable { scheme, rows })
}
