//! Run configuration and initial data.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use thiserror::Error;

use crate::model::{smoothstep, Field, Grid1D, GrowthLaw, ModelError, PressureLaw, SimState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("final time must be nonnegative and finite, got {0}")]
    FinalTime(f64),
    #[error("CFL safety factor must lie in (0, 1], got {0}")]
    Safety(f64),
    #[error("snapshot interval must be positive, got {0}")]
    SnapshotInterval(f64),
    #[error("semi-implicit time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("initial profile: {0}")]
    Initial(String),
    #[error(
        "boundary margin: support may reach |x| = {reach:.4} by the final time, \
         but the domain only extends to [{x_min}, {x_max}]"
    )]
    BoundaryMargin { reach: f64, x_min: f64, x_max: f64 },
}

/// Compactly supported initial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum InitialProfile {
    /// `height * s((half_width - |x|) / smoothing_width)` with `s` the cubic
    /// smoothstep; the support is exactly `|x| < half_width`.
    Plateau {
        height: f64,
        half_width: f64,
        smoothing_width: f64,
    },
    /// Gaussian truncated to zero beyond `GAUSSIAN_CUTOFF` standard deviations.
    Gaussian { amplitude: f64, sigma: f64 },
    /// Piecewise-linear interpolation of `(x, n)` pairs, zero outside.
    Table { x: Vec<f64>, n: Vec<f64> },
}

pub const GAUSSIAN_CUTOFF: f64 = 5.0;

impl Default for InitialProfile {
    fn default() -> Self {
        Self::Plateau {
            height: 0.8,
            half_width: 0.5,
            smoothing_width: 0.1,
        }
    }
}

impl InitialProfile {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Plateau {
                height,
                half_width,
                smoothing_width,
            } => height * smoothstep((half_width - x.abs()) / smoothing_width),
            Self::Gaussian { amplitude, sigma } => {
                let z = x / sigma;
                if z.abs() >= GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    amplitude * (-0.5 * z * z).exp()
                }
            }
            Self::Table { x: xs, n } => {
                if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&xi| xi <= x).min(xs.len() - 1).max(1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
                n[k - 1] + w * (n[k] - n[k - 1])
            }
        }
    }

    /// Radius of the smallest origin-centred interval containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Plateau { half_width, .. } => *half_width,
            Self::Gaussian { sigma, .. } => GAUSSIAN_CUTOFF * sigma,
            Self::Table { x, .. } => x.iter().fold(0.0, |r, xi| r.max(xi.abs())),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Self::Plateau { height, .. } => *height,
            Self::Gaussian { amplitude, .. } => *amplitude,
            Self::Table { n, .. } => n.iter().copied().fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<(), ValidationError> {
        let bad = |msg: String| Err(ValidationError::Initial(msg));
        match self {
            Self::Plateau {
                height,
                half_width,
                smoothing_width,
            } => {
                if !(*height >= 0.0) {
                    return bad(format!("plateau height must be nonnegative, got {height}"));
                }
                if !(*half_width > 0.0) || !(*smoothing_width > 0.0) {
                    return bad("plateau widths must be positive".into());
                }
                if smoothing_width > half_width {
                    return bad("smoothing width exceeds the plateau half width".into());
                }
            }
            Self::Gaussian { amplitude, sigma } => {
                if !(*amplitude >= 0.0) || !(*sigma > 0.0) {
                    return bad("gaussian needs amplitude >= 0 and sigma > 0".into());
                }
            }
            Self::Table { x, n } => {
                if x.len() != n.len() || x.len() < 2 {
                    return bad("table needs matching x and n columns with >= 2 rows".into());
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table x column must be strictly increasing".into());
                }
                if n.iter().any(|v| !(*v >= 0.0)) {
                    return bad("table densities must be nonnegative".into());
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, grid: &Grid1D) -> Field {
        Field::from_fn(grid, |x| self.value(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_halvings: u32,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-11,
            max_halvings: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Integrator {
    /// Monotone upwind finite volumes, step size from the CFL bound.
    ExplicitUpwind,
    /// Newton on the diffusive form with a fixed step `dt` (capped by the
    /// reaction stability bound).
    SemiImplicit { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: Grid1D,
    pub law: PressureLaw,
    pub growth: GrowthLaw,
    pub initial: InitialProfile,
    pub final_time: f64,
    pub integrator: Integrator,
    pub cfl_safety: f64,
    pub snapshot_interval: f64,
    pub newton: NewtonSettings,
    /// Steps between evaluations of the entropy source integral.
    pub entropy_stride: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_G_SLOPE: f64 = 10.0;
pub const DEFAULT_P_HOMEOSTATIC: f64 = 10.0;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: Grid1D::new(-4.0, 4.0, 1600).expect("default grid"),
            law: PressureLaw::Singular {
                epsilon: DEFAULT_EPSILON,
            },
            growth: GrowthLaw {
                g_slope: DEFAULT_G_SLOPE,
                p_homeostatic: DEFAULT_P_HOMEOSTATIC,
            },
            initial: InitialProfile::default(),
            final_time: 0.1,
            integrator: Integrator::ExplicitUpwind,
            cfl_safety: 0.9,
            snapshot_interval: 0.005,
            newton: NewtonSettings::default(),
            entropy_stride: 1,
            seed: 42,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.validate_parameters()?;
        let reach = self.predicted_reach();
        let margin = 2.0 * self.grid.h();
        if reach + margin > self.grid.x_max() || -reach - margin < self.grid.x_min() {
            return Err(ValidationError::BoundaryMargin {
                reach,
                x_min: self.grid.x_min(),
                x_max: self.grid.x_max(),
            });
        }
        Ok(())
    }

    /// Everything in [`validate`](Self::validate) except the boundary margin.
    pub fn validate_parameters(&self) -> Result<(), ValidationError> {
        self.law.validate()?;
        self.growth.validate()?;
        Grid1D::new(self.grid.x_min(), self.grid.x_max(), self.grid.num_cells())?;
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(ValidationError::FinalTime(self.final_time));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(ValidationError::Safety(self.cfl_safety));
        }
        if !(self.snapshot_interval > 0.0) {
            return Err(ValidationError::SnapshotInterval(self.snapshot_interval));
        }
        if let Integrator::SemiImplicit { dt } = self.integrator {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ValidationError::TimeStep(dt));
            }
        }
        self.initial.validate()?;
        if let PressureLaw::Singular { .. } = self.law {
            let ceiling = self.law.density_ceiling(self.growth.p_homeostatic);
            if self.initial.max_value() > ceiling {
                return Err(ValidationError::Initial(format!(
                    "initial density {} exceeds the ceiling P_M/(P_M+eps) = {ceiling}",
                    self.initial.max_value()
                )));
            }
        }
        Ok(())
    }

    /// Initial support radius plus the distance a saturated front travels at
    /// the limiting speed `P_M sqrt(g)` until the final time.
    pub fn predicted_reach(&self) -> f64 {
        self.initial.support_radius()
            + self.growth.p_homeostatic * self.growth.g_slope.sqrt() * self.final_time
    }

    pub fn initial_state(&self) -> SimState {
        SimState::new(0.0, self.initial.sample(&self.grid))
    }

    /// Stable content hash (16 hex digits). Output paths are excluded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy of this config with the domain and cell count replaced so that
    /// the spacing is `h` on `[-half_length, half_length]`.
    pub fn with_domain(mut self, half_length: f64, h: f64) -> Self {
        self.grid = Grid1D::with_spacing(-half_length, half_length, h).expect("valid domain");
        self
    }
}
