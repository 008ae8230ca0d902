//! Constitutive laws, the spatial grid, and the simulation state.
//!
//! The density `n` is the only stored unknown. Pressure is always derived
//! from it through a [`PressureLaw`], so the state law can never drift out
//! of sync with the density.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance from `n = 1` that the singular law refuses to evaluate.
pub const SINGULARITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("density {n} outside the domain of the {law} pressure law")]
    DensityDomain { law: &'static str, n: f64 },
    #[error("pressure {p} must be nonnegative")]
    PressureDomain { p: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field has {got} values but the grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field value at cell {index} is not finite")]
    NonFinite { index: usize },
}

/// Uniform cell-centred grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    num_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, num_cells: usize) -> Result<Self, ModelError> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(ModelError::InvalidParameter(format!(
                "grid requires x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if num_cells < 3 {
            return Err(ModelError::InvalidParameter(format!(
                "grid requires at least 3 cells, got {num_cells}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            num_cells,
        })
    }

    /// Grid on `[x_min, x_max]` whose cell width is as close as possible to `h`.
    pub fn with_spacing(x_min: f64, x_max: f64, h: f64) -> Result<Self, ModelError> {
        if !(h > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "cell width must be positive, got {h}"
            )));
        }
        Self::new(x_min, x_max, ((x_max - x_min) / h).round() as usize)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.num_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.num_cells).map(move |i| self.center(i))
    }
}

/// One real value per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(grid: &Grid1D) -> Self {
        Self(vec![0.0; grid.num_cells()])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self(grid.centers().map(f).collect())
    }

    /// Checks length and finiteness against `grid`.
    pub fn for_grid(grid: &Grid1D, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.num_cells() {
            return Err(ModelError::LengthMismatch {
                expected: grid.num_cells(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h * sum(values)`.
    pub fn integral(&self, grid: &Grid1D) -> f64 {
        grid.h() * self.0.iter().sum::<f64>()
    }

    /// Discrete total variation `sum |v[i+1] - v[i]|`.
    pub fn total_variation(&self) -> f64 {
        self.0.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// `h * sum |a - b|`.
    pub fn l1_distance(&self, other: &Field, grid: &Grid1D) -> f64 {
        grid.h()
            * self
                .0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
    }
}

impl From<Field> for Vec<f64> {
    fn from(field: Field) -> Self {
        field.0
    }
}

/// State law linking density and pressure.
///
/// `Singular` is `P(n) = eps n / (1 - n)`, which blows up at full packing.
/// `PowerLaw` is `Pi(n) = gamma / (gamma - 1) n^(gamma - 1)`, whose diffusion
/// potential is exactly `n^gamma` (porous medium equation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum PressureLaw {
    Singular { epsilon: f64 },
    PowerLaw { gamma: f64 },
}

impl PressureLaw {
    pub fn singular(epsilon: f64) -> Result<Self, ModelError> {
        let law = Self::Singular { epsilon };
        law.validate()?;
        Ok(law)
    }

    pub fn power_law(gamma: f64) -> Result<Self, ModelError> {
        let law = Self::PowerLaw { gamma };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Self::Singular { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => Err(
                ModelError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")),
            ),
            Self::PowerLaw { gamma } if !(gamma > 1.0 && gamma.is_finite()) => Err(
                ModelError::InvalidParameter(format!("gamma must exceed 1, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Singular { .. } => "singular",
            Self::PowerLaw { .. } => "power-law",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Self::Singular { epsilon } => Some(epsilon),
            Self::PowerLaw { .. } => None,
        }
    }

    fn check_density(&self, n: f64) -> Result<(), ModelError> {
        let ok = match self {
            Self::Singular { .. } => (0.0..1.0 - SINGULARITY_GUARD).contains(&n),
            Self::PowerLaw { .. } => n >= 0.0 && n.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::DensityDomain {
                law: self.name(),
                n,
            })
        }
    }

    pub fn pressure(&self, n: f64) -> Result<f64, ModelError> {
        self.check_density(n)?;
        Ok(self.pressure_unchecked(n))
    }

    /// Pressure without the domain check, for inner loops over states that
    /// are already known to be admissible.
    #[inline]
    pub fn pressure_unchecked(&self, n: f64) -> f64 {
        match *self {
            Self::Singular { epsilon } => epsilon * n / (1.0 - n),
            Self::PowerLaw { gamma } => gamma / (gamma - 1.0) * int_pow(n, gamma - 1.0),
        }
    }

    /// Inverse of [`pressure`](Self::pressure): `N(p) = p / (eps + p)` for the
    /// singular law.
    pub fn density(&self, p: f64) -> Result<f64, ModelError> {
        if !(p >= 0.0) {
            return Err(ModelError::PressureDomain { p });
        }
        Ok(match *self {
            Self::Singular { epsilon } => p / (epsilon + p),
            Self::PowerLaw { gamma } => ((gamma - 1.0) / gamma * p).powf(1.0 / (gamma - 1.0)),
        })
    }

    /// Diffusion potential `H(n) = int_0^n u P'(u) du`.
    pub fn potential(&self, n: f64) -> Result<f64, ModelError> {
        self.check_density(n)?;
        Ok(self.potential_unchecked(n))
    }

    #[inline]
    pub fn potential_unchecked(&self, n: f64) -> f64 {
        match *self {
            // P - eps ln(P + eps) + eps ln(eps), written to avoid cancellation
            Self::Singular { epsilon } => {
                let p = epsilon * n / (1.0 - n);
                p - epsilon * (p / epsilon).ln_1p()
            }
            Self::PowerLaw { gamma } => int_pow(n, gamma),
        }
    }

    /// `H'(n) = n P'(n)`, the nonlinear diffusion coefficient.
    pub fn diffusivity(&self, n: f64) -> Result<f64, ModelError> {
        self.check_density(n)?;
        Ok(self.diffusivity_unchecked(n))
    }

    #[inline]
    pub fn diffusivity_unchecked(&self, n: f64) -> f64 {
        match *self {
            Self::Singular { epsilon } => {
                let gap = 1.0 - n;
                epsilon * n / (gap * gap)
            }
            Self::PowerLaw { gamma } => gamma * int_pow(n, gamma - 1.0),
        }
    }

    /// `H''(n)`, needed to expand `(H(n))_xx = H'(n) n_xx + H''(n) n_x^2`.
    pub fn diffusivity_slope_unchecked(&self, n: f64) -> f64 {
        match *self {
            Self::Singular { epsilon } => {
                let gap = 1.0 - n;
                epsilon * (1.0 + n) / (gap * gap * gap)
            }
            Self::PowerLaw { gamma } => gamma * (gamma - 1.0) * int_pow(n, gamma - 2.0),
        }
    }

    /// Largest density compatible with `p <= p_max`.
    pub fn density_ceiling(&self, p_max: f64) -> f64 {
        self.density(p_max).unwrap_or(0.0)
    }
}

/// `x^e`, using repeated multiplication when `e` is a small integer.
#[inline]
fn int_pow(x: f64, e: f64) -> f64 {
    match small_exponent(e) {
        Some(k) => pow_u32(x, k),
        None if e.fract() == 0.0 && e.abs() <= 64.0 => x.powi(e as i32),
        None => x.powf(e),
    }
}

/// `e` as a `u32` when it is a whole number in `[0, 64]`.
#[inline]
pub(crate) fn small_exponent(e: f64) -> Option<u32> {
    (e.fract() == 0.0 && (0.0..=64.0).contains(&e)).then_some(e as u32)
}

/// `x^k` by square-and-multiply. Inlined because the `powi` libcall costs
/// several times more than the rest of an explicit cell update.
#[inline(always)]
pub(crate) fn pow_u32(mut x: f64, mut k: u32) -> f64 {
    let mut r = 1.0;
    loop {
        if k & 1 == 1 {
            r *= x;
        }
        k >>= 1;
        if k == 0 {
            return r;
        }
        x *= x;
    }
}

/// Ramp growth `G(p) = g (P_M - p)_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthLaw {
    pub g_slope: f64,
    pub p_homeostatic: f64,
}

impl GrowthLaw {
    /// `g_slope = 0` is accepted and gives a conservative model.
    pub fn new(g_slope: f64, p_homeostatic: f64) -> Result<Self, ModelError> {
        let law = Self {
            g_slope,
            p_homeostatic,
        };
        law.validate()?;
        Ok(law)
    }

    /// No growth, with the homeostatic pressure still acting as the
    /// pressure ceiling.
    pub fn none(p_homeostatic: f64) -> Self {
        Self {
            g_slope: 0.0,
            p_homeostatic,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.g_slope >= 0.0 && self.g_slope.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "growth slope must be nonnegative, got {}",
                self.g_slope
            )));
        }
        if !(self.p_homeostatic > 0.0 && self.p_homeostatic.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "homeostatic pressure must be positive, got {}",
                self.p_homeostatic
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn rate(&self, p: f64) -> f64 {
        self.g_slope * (self.p_homeostatic - p).max(0.0)
    }

    /// `G_m = g P_M`, the sup of the growth rate on `[0, inf)`.
    pub fn max_rate(&self) -> f64 {
        self.g_slope * self.p_homeostatic
    }
}

/// Time plus cell densities. Pressure is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub n: Field,
}

impl SimState {
    pub fn new(t: f64, n: Field) -> Self {
        Self { t, n }
    }

    /// Checks nonnegativity and, under the singular law, the density
    /// ceiling `P_M / (P_M + eps)`.
    pub fn validate(&self, law: &PressureLaw, growth: &GrowthLaw) -> Result<(), ModelError> {
        let ceiling = match law {
            PressureLaw::Singular { .. } => law.density_ceiling(growth.p_homeostatic) + 1e-12,
            PressureLaw::PowerLaw { .. } => f64::INFINITY,
        };
        for (i, &n) in self.n.values().iter().enumerate() {
            if !n.is_finite() {
                return Err(ModelError::NonFinite { index: i });
            }
            if n < 0.0 || n > ceiling {
                return Err(ModelError::DensityDomain { law: law.name(), n });
            }
        }
        Ok(())
    }

    pub fn pressure(&self, law: &PressureLaw) -> Result<Field, ModelError> {
        let values = self
            .n
            .values()
            .iter()
            .map(|&n| law.pressure(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Field(values))
    }
}

/// Cubic smoothstep, 0 below 0 and 1 above 1.
pub fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 0.5;

    fn singular() -> PressureLaw {
        PressureLaw::singular(EPS).unwrap()
    }

    #[test]
    fn singular_pressure_examples() {
        let law = singular();
        assert_eq!(law.pressure(0.5).unwrap(), 0.5);
        assert_eq!(law.pressure(0.0).unwrap(), 0.0);
        assert!((law.pressure(10.0 / 10.5).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(
            PressureLaw::power_law(20.0).unwrap().pressure(0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn singular_pressure_rejects_overlap() {
        let law = singular();
        assert!(matches!(
            law.pressure(1.0),
            Err(ModelError::DensityDomain { .. })
        ));
        assert!(law.pressure(1.0 - 1e-13).is_err());
        assert!(law.pressure(-0.1).is_err());
    }

    #[test]
    fn density_inverts_pressure() {
        let law = singular();
        assert_eq!(law.density(0.0).unwrap(), 0.0);
        assert!((law.density(10.0).unwrap() - 10.0 / 10.5).abs() < 1e-15);
        for n in [0.1, 0.5, 0.9] {
            let back = law.density(law.pressure(n).unwrap()).unwrap();
            assert!((back - n).abs() < 1e-14, "{n} -> {back}");
        }
        assert!(matches!(
            law.density(-1.0),
            Err(ModelError::PressureDomain { .. })
        ));
    }

    #[test]
    fn potential_examples() {
        let law = singular();
        assert_eq!(law.potential(0.0).unwrap(), 0.0);
        let expected = 0.5 + 0.5 * 0.5f64.ln();
        assert!((law.potential(0.5).unwrap() - expected).abs() < 1e-15);
        let pm = PressureLaw::power_law(20.0).unwrap();
        assert!((pm.potential(0.9).unwrap() - 0.9f64.powi(20)).abs() < 1e-15);
    }

    #[test]
    fn diffusivity_examples() {
        let law = singular();
        assert_eq!(law.diffusivity(0.0).unwrap(), 0.0);
        let d = law.diffusivity(10.0 / 10.5).unwrap();
        assert!((d - 210.0).abs() < 1e-9, "{d}");
        // centred difference of H at the ceiling density
        let n = 10.0 / 10.5;
        let step = 1e-7;
        let fd =
            (law.potential(n + step).unwrap() - law.potential(n - step).unwrap()) / (2.0 * step);
        assert!((fd - 210.0).abs() / 210.0 < 1e-6, "{fd}");
        let quad = PressureLaw::power_law(2.0).unwrap();
        assert!((quad.diffusivity(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diffusivity_slope_is_derivative() {
        for law in [singular(), PressureLaw::power_law(20.0).unwrap()] {
            for n in [0.2, 0.5, 0.8] {
                let step = 1e-6;
                let fd = (law.diffusivity_unchecked(n + step)
                    - law.diffusivity_unchecked(n - step))
                    / (2.0 * step);
                let exact = law.diffusivity_slope_unchecked(n);
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                    "{n}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn growth_examples() {
        let g = GrowthLaw::new(10.0, 10.0).unwrap();
        assert_eq!(g.rate(10.0), 0.0);
        assert_eq!(g.rate(0.0), 100.0);
        assert_eq!(g.max_rate(), 100.0);
        assert_eq!(g.rate(12.0), 0.0);
        assert!(GrowthLaw::new(-1.0, 10.0).is_err());
        assert!(GrowthLaw::new(1.0, 0.0).is_err());
    }

    #[test]
    fn law_parameter_validation() {
        assert!(PressureLaw::singular(0.0).is_err());
        assert!(PressureLaw::singular(-1.0).is_err());
        assert!(PressureLaw::power_law(1.0).is_err());
        assert!(PressureLaw::power_law(f64::NAN).is_err());
    }

    #[test]
    fn power_law_ceiling_exceeds_one() {
        let pm = PressureLaw::power_law(20.0).unwrap();
        let ceiling = pm.density_ceiling(10.0);
        assert!(ceiling > 1.0);
        assert!((pm.pressure(ceiling).unwrap() - 10.0).abs() < 1e-10);
    }

    #[test]
    fn grid_geometry() {
        let grid = Grid1D::new(-4.0, 4.0, 1600).unwrap();
        assert!((grid.h() - 0.005).abs() < 1e-15);
        assert!((grid.center(0) - (-4.0 + 0.0025)).abs() < 1e-15);
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert_eq!(
            Grid1D::with_spacing(-4.0, 4.0, 1.0 / 200.0)
                .unwrap()
                .num_cells(),
            1600
        );
    }

    #[test]
    fn field_rejects_bad_input() {
        let grid = Grid1D::new(0.0, 1.0, 4).unwrap();
        assert!(Field::for_grid(&grid, vec![0.0; 3]).is_err());
        assert!(matches!(
            Field::for_grid(&grid, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(ModelError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn state_validation_enforces_ceiling() {
        let grid = Grid1D::new(0.0, 1.0, 4).unwrap();
        let law = singular();
        let growth = GrowthLaw::new(10.0, 10.0).unwrap();
        let ok = SimState::new(
            0.0,
            Field::for_grid(&grid, vec![0.0, 0.5, 10.0 / 10.5, 0.1]).unwrap(),
        );
        assert!(ok.validate(&law, &growth).is_ok());
        let over = SimState::new(
            0.0,
            Field::for_grid(&grid, vec![0.0, 0.96, 0.0, 0.0]).unwrap(),
        );
        assert!(over.validate(&law, &growth).is_err());
    }

    #[test]
    fn pow_u32_matches_powi() {
        for k in 0..=64 {
            for x in [0.0, 0.3, 0.999, 1.0, 1.1257, 2.5] {
                assert_eq!(
                    pow_u32(x, k).to_bits(),
                    x.powi(k as i32).to_bits(),
                    "{x}^{k}"
                );
            }
        }
        assert_eq!(small_exponent(19.0), Some(19));
        assert_eq!(small_exponent(0.5), None);
        assert_eq!(small_exponent(-1.0), None);
    }
}
