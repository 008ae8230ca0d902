use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::config::RunConfig;
use crate::diagnostics::{mass_budget, MassBudget};
use crate::model::PressureLaw;
use crate::solver::{run, Trajectory};

/// Exponent of the stiff power law run next to the singular law.
pub const FIG1_GAMMA: f64 = 20.0;

/// Reference constants (`eps = 0.5`, `G(p) = 10 (10 - p)_+`, default
/// plateau) on `[-20, 20]` with `h = 1/200` up to `T = 0.5`.
///
/// The front travels at about `P_M sqrt(g) ~ 31.6`, so the domain has to be
/// much wider than the plateau. Snapshots every `1/800` keep two per
/// barrier window `theta = 1/400`.
pub fn fig1_config() -> RunConfig {
    RunConfig {
        final_time: 0.5,
        snapshot_interval: 0.00125,
        entropy_stride: 200,
        ..RunConfig::default()
    }
    .with_domain(20.0, 1.0 / 200.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig1Claims {
    /// `P_M / (P_M + eps)`
    pub ceiling: f64,
    pub singular_max_n: f64,
    pub singular_max_p: f64,
    /// `max n <= ceiling + 1e-10` and `max p <= P_M + 1e-8` at every snapshot.
    pub ceiling_holds: bool,
    pub singular_below_one: bool,
    pub power_max_n: f64,
    pub power_exceeds_one: bool,
    pub singular_mass: MassBudget,
    pub power_mass: MassBudget,
}

impl Fig1Claims {
    pub fn holds(&self) -> bool {
        self.ceiling_holds
            && self.singular_below_one
            && self.power_exceeds_one
            && self.singular_mass.holds
            && self.power_mass.holds
    }
}

#[derive(Debug, Clone)]
pub struct Fig1Result {
    pub singular: Trajectory,
    pub power_law: Trajectory,
    pub claims: Fig1Claims,
}

/// Runs `base` (which must use the singular law) and the same setup under
/// the power law with exponent `gamma`, then evaluates the claims.
pub fn fig1_experiment(base: &RunConfig, gamma: f64) -> Result<Fig1Result, ExperimentError> {
    if !matches!(base.law, PressureLaw::Singular { .. }) {
        return Err(ExperimentError::InvalidInput(
            "the base configuration must use the singular law".into(),
        ));
    }
    let power_cfg = RunConfig {
        law: PressureLaw::power_law(gamma).map_err(crate::config::ValidationError::from)?,
        ..base.clone()
    };
    let (singular, power_law) = rayon::join(|| run(base), || run(&power_cfg));
    let singular = singular.map_err(ExperimentError::run("singular"))?;
    let power_law =
        power_law.map_err(ExperimentError::run(format!("power law, gamma = {gamma}")))?;
    let claims = evaluate(&singular, &power_law);
    Ok(Fig1Result {
        singular,
        power_law,
        claims,
    })
}

fn evaluate(singular: &Trajectory, power_law: &Trajectory) -> Fig1Claims {
    let problem = &singular.problem;
    let ceiling = problem.density_ceiling();
    let p_max = problem.growth.p_homeostatic;
    let ceiling_holds = singular
        .records()
        .all(|r| r.max_n <= ceiling + 1e-10 && r.max_p <= p_max + 1e-8);
    let singular_max_n = singular.max_density();
    let power_max_n = power_law.max_density();
    Fig1Claims {
        ceiling,
        singular_max_n,
        singular_max_p: singular.max_pressure(),
        ceiling_holds,
        singular_below_one: singular_max_n < 1.0,
        power_max_n,
        power_exceeds_one: power_max_n > 1.0,
        singular_mass: mass_budget(singular),
        power_mass: mass_budget(power_law),
    }
}
