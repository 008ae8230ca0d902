//! Reference solution of the limit free-boundary problem in 1D.
//!
//! A saturated patch `[-L/2, L/2]` (density 1) carries the pressure solving
//! `-p'' = g (P_M - p)` with `p(+-L/2) = 0`:
//!
//! ```text
//! p(x) = P_M (1 - cosh(sqrt(g) x) / cosh(sqrt(g) L / 2))
//! ```
//!
//! Each endpoint moves with the Darcy velocity `-p'(L/2)`, so
//! `dL/dt = 2 P_M sqrt(g) tanh(sqrt(g) L / 2)`.

use serde::{Deserialize, Serialize};

use crate::model::GrowthLaw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontState {
    pub t: f64,
    /// Length of the saturated interval.
    pub length: f64,
}

impl FrontState {
    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }
}

/// Pressure of the saturated patch of length `length` at `x`; zero outside.
pub fn patch_pressure(length: f64, growth: &GrowthLaw, x: f64) -> f64 {
    let half = 0.5 * length;
    if x.abs() >= half {
        return 0.0;
    }
    let k = growth.g_slope.sqrt();
    // cosh(kx)/cosh(kL/2) = exp(k(|x| - L/2)) (1 + e^{-2k|x|}) / (1 + e^{-kL}),
    // which stays finite for long patches
    let ratio = (k * (x.abs() - half)).exp() * (1.0 + (-2.0 * k * x.abs()).exp())
        / (1.0 + (-2.0 * k * half).exp());
    growth.p_homeostatic * (1.0 - ratio)
}

/// Outward speed of one endpoint, `P_M sqrt(g) tanh(sqrt(g) L / 2)`.
pub fn front_speed(length: f64, growth: &GrowthLaw) -> f64 {
    let k = growth.g_slope.sqrt();
    growth.p_homeostatic * k * (0.5 * k * length).tanh()
}

/// Classical RK4 on `dL/dt = 2 front_speed(L)` from `(0, length0)` to
/// `final_time`; the last step is shortened to land on `final_time`.
pub fn evolve_front(length0: f64, growth: &GrowthLaw, final_time: f64, dt: f64) -> Vec<FrontState> {
    assert!(
        length0 > 0.0 && dt > 0.0,
        "evolve_front needs L0 > 0 and dt > 0"
    );
    let rate = |l: f64| 2.0 * front_speed(l, growth);
    let mut out = vec![FrontState {
        t: 0.0,
        length: length0,
    }];
    let mut t = 0.0;
    let mut l = length0;
    let steps = (final_time / dt).ceil() as usize;
    for k in 0..steps {
        let h = if k + 1 == steps { final_time - t } else { dt };
        if h <= 0.0 {
            break;
        }
        let k1 = rate(l);
        let k2 = rate(l + 0.5 * h * k1);
        let k3 = rate(l + 0.5 * h * k2);
        let k4 = rate(l + h * k3);
        l += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if k + 1 == steps { final_time } else { t + h };
        out.push(FrontState { t, length: l });
    }
    out
}

/// Front length at `final_time`.
pub fn front_length_at(length0: f64, growth: &GrowthLaw, final_time: f64, dt: f64) -> f64 {
    evolve_front(length0, growth, final_time, dt)
        .last()
        .map(|s| s.length)
        .unwrap_or(length0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> GrowthLaw {
        GrowthLaw::new(10.0, 10.0).unwrap()
    }

    #[test]
    fn pressure_vanishes_at_endpoints() {
        let g = fig1();
        assert_eq!(patch_pressure(1.0, &g, 0.5), 0.0);
        assert_eq!(patch_pressure(1.0, &g, -0.5), 0.0);
        assert_eq!(patch_pressure(1.0, &g, 2.0), 0.0);
        assert!(patch_pressure(1.0, &g, 0.5 - 1e-12).abs() < 1e-9);
    }

    #[test]
    fn pressure_centre_value() {
        let g = fig1();
        let expected = 10.0 * (1.0 - 1.0 / (10f64.sqrt() / 2.0).cosh());
        assert!((patch_pressure(1.0, &g, 0.0) - expected).abs() < 1e-13);
        assert!((patch_pressure(200.0, &g, 0.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn speed_limits() {
        let g = fig1();
        assert!(front_speed(1e-12, &g) < 1e-9);
        assert!((front_speed(100.0, &g) - 10.0 * 10f64.sqrt()).abs() < 1e-9);
        assert!(front_speed(2.0, &g) > front_speed(1.0, &g));
    }

    #[test]
    fn zero_growth_freezes_front() {
        let g = GrowthLaw::none(10.0);
        let path = evolve_front(1.0, &g, 0.5, 0.01);
        assert!(path.iter().all(|s| s.length == 1.0));
        assert_eq!(path.last().unwrap().t, 0.5);
    }

    #[test]
    fn saturated_regime_moves_at_limit_speed() {
        let g = fig1();
        let l0 = 4.0; // sqrt(10) * 2 > 5
        let l = front_length_at(l0, &g, 0.2, 1e-4);
        let asymptote = l0 + 2.0 * 10.0 * 10f64.sqrt() * 0.2;
        assert!((l - asymptote).abs() / asymptote < 0.01);
    }

    #[test]
    fn front_is_strictly_increasing() {
        let path = evolve_front(1.0, &fig1(), 0.1, 1e-3);
        assert!(path.windows(2).all(|w| w[1].length > w[0].length));
        assert_eq!(path.len(), 101);
    }
}
