//! Discrete measurements of the a-priori estimates and limit relations.
//!
//! Everything here is a pure function of states (or of a finished
//! [`Trajectory`]) and never feeds back into the solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Field, Grid1D, GrowthLaw, PressureLaw, SimState};
use crate::solver::{active_window, Problem, Trajectory};

/// Pressure level above which a cell counts as occupied.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// Pressure level below which cells are ignored by the AB monitor.
pub const AB_THRESHOLD: f64 = 1e-8;
/// Slack allowed on the pointwise barrier comparison.
pub const BARRIER_TOLERANCE: f64 = 1e-8;
/// Relative slack on the time-integrated entropy inequality.
pub const ENTROPY_SLACK: f64 = 0.05;
/// Absolute slack on the same inequality (binding when the source vanishes).
pub const ENTROPY_ABS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("invalid barrier: {0}")]
    SpecInvalid(String),
    #[error("the entropy budget is only defined for the singular pressure law")]
    NotSingular,
}

/// Per-snapshot measurements. Field order matches the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `h sum n`
    pub mass: f64,
    pub max_n: f64,
    pub max_p: f64,
    pub support_radius: f64,
    /// `sum |n[i+1] - n[i]|`
    pub bv_seminorm: f64,
    pub compl_residual_l1: f64,
    /// `max |(1 - n) p - eps n|`; zero for the power law.
    pub state_law_gap: f64,
    /// Instantaneous `h sum ((p[i+1] - p[i]) / h)^2`.
    pub grad_p_l2_sq: f64,
    /// `h sum Psi(n)`, singular law only.
    pub entropy: Option<f64>,
    /// Aronson-Benilan ratio; absent on the first snapshot.
    pub ab_min_ratio: Option<f64>,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "mass",
        "max_n",
        "max_p",
        "support_radius",
        "bv",
        "compl_residual",
        "state_law_gap",
        "grad_p_l2_sq",
        "entropy",
        "ab_min_ratio",
    ];
}

/// Full record for `state`. `prev` is the state one step earlier together
/// with that step's size; it enables the AB ratio.
pub fn record(
    problem: &Problem,
    state: &SimState,
    prev: Option<(&SimState, f64)>,
) -> DiagnosticsRecord {
    let grid = &problem.grid;
    let n = state.n.values();
    let p = pressure_values(&problem.law, n);
    let p_field = Field::for_grid(grid, p.clone()).unwrap_or_else(|_| Field::zeros(grid));
    DiagnosticsRecord {
        t: state.t,
        mass: state.n.integral(grid),
        max_n: state.n.max(),
        max_p: p.iter().copied().fold(0.0, f64::max),
        support_radius: support_radius(&p_field, grid, SUPPORT_THRESHOLD),
        bv_seminorm: state.n.total_variation(),
        compl_residual_l1: residual_from_pressure(&p, grid, &problem.growth),
        state_law_gap: state_law_gap(&problem.law, n, &p),
        grad_p_l2_sq: gradient_energy(problem, n),
        entropy: entropy(problem, n),
        ab_min_ratio: prev.map(|(before, dt)| ab_monitor(before, state, &problem.law, dt)),
    }
}

fn pressure_values(law: &PressureLaw, n: &[f64]) -> Vec<f64> {
    n.iter().map(|&v| law.pressure_unchecked(v)).collect()
}

fn state_law_gap(law: &PressureLaw, n: &[f64], p: &[f64]) -> f64 {
    match *law {
        PressureLaw::Singular { epsilon } => n
            .iter()
            .zip(p)
            .map(|(&n, &p)| ((1.0 - n) * p - epsilon * n).abs())
            .fold(0.0, f64::max),
        PressureLaw::PowerLaw { .. } => 0.0,
    }
}

/// Discrete L1 norm of `p^2 (p'' + G(p))` over interior cells.
pub fn complementary_residual(problem: &Problem, state: &SimState) -> f64 {
    let p = pressure_values(&problem.law, state.n.values());
    residual_from_pressure(&p, &problem.grid, &problem.growth)
}

fn residual_from_pressure(p: &[f64], grid: &Grid1D, growth: &GrowthLaw) -> f64 {
    let h = grid.h();
    let h2 = h * h;
    let sum: f64 = p
        .windows(3)
        .map(|w| {
            let lap = (w[2] - 2.0 * w[1] + w[0]) / h2;
            (w[1] * w[1] * (lap + growth.rate(w[1]))).abs()
        })
        .sum();
    h * sum
}

/// Weak form of the complementary relation at one time, tested against the
/// bump `phi(x) = (1 - (x/R)^2)_+^2` with `R` at 90% of the shorter
/// half-domain:
///
/// `| int -2 phi p |p'|^2 - p^2 p' phi' + phi p^2 G(p) dx |`.
pub fn complementary_residual_weak(problem: &Problem, state: &SimState) -> f64 {
    let grid = &problem.grid;
    let h = grid.h();
    let radius = 0.9 * grid.x_min().abs().min(grid.x_max().abs());
    let phi = |x: f64| {
        let z = x / radius;
        if z.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - z * z).powi(2)
        }
    };
    let p = pressure_values(&problem.law, state.n.values());
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        total += phi(grid.center(i)) * pi * pi * problem.growth.rate(pi) * h;
    }
    for i in 0..p.len() - 1 {
        let xf = grid.center(i) + 0.5 * h;
        let pf = 0.5 * (p[i] + p[i + 1]);
        let dp = (p[i + 1] - p[i]) / h;
        let dphi = (phi(grid.center(i + 1)) - phi(grid.center(i))) / h;
        total += (-2.0 * phi(xf) * pf * dp * dp - pf * pf * dp * dphi) * h;
    }
    total.abs()
}

/// Largest `|x_i|` among cells with `p_i > threshold`, or 0.
pub fn support_radius(p: &Field, grid: &Grid1D, threshold: f64) -> f64 {
    p.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| grid.center(i).abs())
        .fold(0.0, f64::max)
}

/// `min t (p_next - p_prev) / (dt p_next)` over cells with `p_next > 1e-8`,
/// with `t = next.t`. Returns `+inf` when no cell qualifies.
pub fn ab_monitor(prev: &SimState, next: &SimState, law: &PressureLaw, dt: f64) -> f64 {
    prev.n
        .values()
        .iter()
        .zip(next.n.values())
        .filter_map(|(&a, &b)| {
            let p_next = law.pressure_unchecked(b);
            (p_next > AB_THRESHOLD).then(|| {
                let p_prev = law.pressure_unchecked(a);
                next.t * (p_next - p_prev) / (dt * p_next)
            })
        })
        .fold(f64::INFINITY, f64::min)
}

/// `h sum ((p[i+1] - p[i]) / h)^2`.
pub fn gradient_energy(problem: &Problem, n: &[f64]) -> f64 {
    let Some((lo, hi)) = active_window(n) else {
        return 0.0;
    };
    let law = problem.law;
    let h = problem.grid.h();
    let mut prev = law.pressure_unchecked(n[lo]);
    let mut sum = 0.0;
    for &v in &n[lo + 1..=hi] {
        let p = law.pressure_unchecked(v);
        sum += (p - prev) * (p - prev);
        prev = p;
    }
    sum / h
}

/// `Psi(n) = eps n (ln n - ln(1 - n))`, extended by `Psi(0) = 0`.
pub fn entropy_density(epsilon: f64, n: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else {
        epsilon * n * (n / (1.0 - n)).ln()
    }
}

/// `psi(n) = Psi'(n) = eps (ln n - ln(1 - n) + 1 / (1 - n))`.
pub fn entropy_derivative(epsilon: f64, n: f64) -> f64 {
    epsilon * ((n / (1.0 - n)).ln() + 1.0 / (1.0 - n))
}

fn entropy(problem: &Problem, n: &[f64]) -> Option<f64> {
    let epsilon = problem.law.epsilon()?;
    let sum: f64 = n.iter().map(|&v| entropy_density(epsilon, v)).sum();
    Some(problem.grid.h() * sum)
}

/// `G_m h sum n |psi(n)|`, the pointwise bound on the entropy source
/// `int n G(p) psi(n)`. Zero for the power law.
pub fn entropy_source_bound(problem: &Problem, n: &[f64]) -> f64 {
    let Some(epsilon) = problem.law.epsilon() else {
        return 0.0;
    };
    let g_max = problem.growth.max_rate();
    if g_max == 0.0 {
        return 0.0;
    }
    let Some((lo, hi)) = active_window(n) else {
        return 0.0;
    };
    let sum: f64 = n[lo..=hi]
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * entropy_derivative(epsilon, v).abs())
        .sum();
    g_max * problem.grid.h() * sum
}

/// Supersolution used to bound the pressure support: on each window of
/// length `theta` started at time `tau` it is
///
/// `C_k - dist(x, [a, b])^2 / (4 (theta + t - tau))`, positive part,
///
/// where `[a, b]` is the hull of the pressure support at `tau` and
/// `C_k = max(C, max p(tau))`. It dominates the pressure for
/// `t - tau <= theta` as long as `theta <= 1 / (4 G_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub c: f64,
    pub theta: f64,
}

impl BarrierSpec {
    /// `theta = 1 / (4 G_m)` for the one-dimensional problem.
    pub fn for_growth(c: f64, growth: &GrowthLaw) -> Self {
        Self {
            c,
            theta: 1.0 / (4.0 * growth.max_rate()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub passed: bool,
    /// Worst `p - p_barrier` over the pressure support, across snapshots.
    pub max_gap: f64,
    /// Worst `support_radius - barrier_radius`; nonpositive on a pass.
    pub max_radius_excess: f64,
    pub windows: usize,
    /// Time of the snapshot that produced `max_gap`.
    pub worst_time: f64,
}

struct BarrierWindow {
    start: f64,
    lower: f64,
    upper: f64,
    height: f64,
}

impl BarrierWindow {
    fn open(start: f64, p: &[f64], grid: &Grid1D, c: f64) -> Self {
        let h = grid.h();
        let first = p.iter().position(|&v| v > SUPPORT_THRESHOLD);
        let last = p.iter().rposition(|&v| v > SUPPORT_THRESHOLD);
        let (lower, upper) = match (first, last) {
            (Some(i), Some(j)) => (grid.center(i) - 0.5 * h, grid.center(j) + 0.5 * h),
            _ => (0.0, 0.0),
        };
        let height = p.iter().copied().fold(c, f64::max);
        Self {
            start,
            lower,
            upper,
            height,
        }
    }

    fn value(&self, theta: f64, t: f64, x: f64) -> f64 {
        let dist = (self.lower - x).max(x - self.upper).max(0.0);
        (self.height - dist * dist / (4.0 * (theta + t - self.start))).max(0.0)
    }

    fn radius(&self, theta: f64, t: f64) -> f64 {
        self.lower.abs().max(self.upper.abs())
            + 2.0 * (self.height * (theta + t - self.start)).sqrt()
    }
}

/// Checks `p <= barrier + 1e-8` and `support_radius <= barrier radius` on
/// every snapshot, restarting the barrier at the last snapshot inside each
/// `theta` window.
pub fn barrier_check(
    trajectory: &Trajectory,
    spec: &BarrierSpec,
) -> Result<BarrierReport, DiagnosticsError> {
    let grid = &trajectory.problem.grid;
    let law = &trajectory.problem.law;
    if !(spec.theta > 0.0) {
        return Err(DiagnosticsError::SpecInvalid(format!(
            "theta must be positive, got {}",
            spec.theta
        )));
    }
    let pressures: Vec<Vec<f64>> = trajectory
        .snapshots
        .iter()
        .map(|s| pressure_values(law, s.state.n.values()))
        .collect();
    let Some(p0) = pressures.first() else {
        return Err(DiagnosticsError::SpecInvalid("empty trajectory".into()));
    };
    let p0_max = p0.iter().copied().fold(0.0, f64::max);
    if spec.c < p0_max {
        return Err(DiagnosticsError::SpecInvalid(format!(
            "C = {} is below the initial pressure maximum {p0_max}",
            spec.c
        )));
    }

    let times: Vec<f64> = trajectory.snapshots.iter().map(|s| s.state.t).collect();
    let tol = 1e-9 * spec.theta;
    let mut window = BarrierWindow::open(times[0], p0, grid, spec.c);
    let mut windows = 1;
    let mut max_gap = f64::NEG_INFINITY;
    let mut worst_time = times[0];
    let mut max_radius_excess = f64::NEG_INFINITY;

    for (j, p) in pressures.iter().enumerate() {
        let t = times[j];
        while t > window.start + spec.theta + tol {
            let restart = (0..j)
                .rev()
                .find(|&m| times[m] > window.start && times[m] <= window.start + spec.theta + tol)
                .ok_or_else(|| {
                    DiagnosticsError::SpecInvalid(format!(
                        "snapshot spacing before t = {t} exceeds the window length {}",
                        spec.theta
                    ))
                })?;
            window = BarrierWindow::open(times[restart], &pressures[restart], grid, spec.c);
            windows += 1;
        }
        let mut gap = f64::NEG_INFINITY;
        let mut radius = 0.0f64;
        for (i, &pi) in p.iter().enumerate() {
            if pi > SUPPORT_THRESHOLD {
                let x = grid.center(i);
                gap = gap.max(pi - window.value(spec.theta, t, x));
                radius = radius.max(x.abs());
            }
        }
        if gap == f64::NEG_INFINITY {
            gap = -window.height;
        }
        if gap > max_gap {
            max_gap = gap;
            worst_time = t;
        }
        let excess = radius - (window.radius(spec.theta, t) + 0.5 * grid.h());
        max_radius_excess = max_radius_excess.max(excess);
    }

    Ok(BarrierReport {
        passed: max_gap <= BARRIER_TOLERANCE && max_radius_excess <= 0.0,
        max_gap,
        max_radius_excess,
        windows,
        worst_time,
    })
}

/// Relative slack on the exponential mass bound.
pub const MASS_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassBudget {
    /// Largest `mass(t) / (exp(G_m t) mass(0))` over the snapshots.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Checks `mass(t) <= exp(G_m t) mass(0) (1 + 1e-8)` at every snapshot.
pub fn mass_budget(trajectory: &Trajectory) -> MassBudget {
    let g_max = trajectory.problem.growth.max_rate();
    let Some(first) = trajectory.snapshots.first() else {
        return MassBudget {
            worst_ratio: 0.0,
            holds: true,
        };
    };
    let (t0, m0) = (first.state.t, first.diagnostics.mass);
    let mut worst_ratio = 0.0f64;
    let mut holds = true;
    for s in &trajectory.snapshots {
        let bound = (g_max * (s.state.t - t0)).exp() * m0;
        holds &= s.diagnostics.mass <= bound * (1.0 + MASS_SLACK);
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(s.diagnostics.mass / bound);
        }
    }
    MassBudget { worst_ratio, holds }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudgetRow {
    pub t: f64,
    pub entropy: f64,
    pub cumulative_grad_p_l2_sq: f64,
    pub rhs_bound: f64,
    /// `Psi(t) - Psi(0) + int_0^t |p'|^2`
    pub lhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudget {
    pub rows: Vec<EntropyBudgetRow>,
    pub holds: bool,
}

/// Time-integrated entropy inequality
/// `Psi(t) - Psi(0) + int |p'|^2 <= int G_m h sum n |psi(n)|`
/// checked with 5% relative and 1e-8 absolute slack.
pub fn entropy_budget(trajectory: &Trajectory) -> Result<EntropyBudget, DiagnosticsError> {
    let problem = &trajectory.problem;
    let epsilon = problem.law.epsilon().ok_or(DiagnosticsError::NotSingular)?;
    let h = problem.grid.h();
    let total = |n: &[f64]| h * n.iter().map(|&v| entropy_density(epsilon, v)).sum::<f64>();
    let psi0 = trajectory
        .snapshots
        .first()
        .map(|s| total(s.state.n.values()))
        .unwrap_or(0.0);
    let rows: Vec<EntropyBudgetRow> = trajectory
        .snapshots
        .iter()
        .map(|s| {
            let entropy = total(s.state.n.values());
            let lhs = entropy - psi0 + s.integrals.grad_p_l2_sq;
            let rhs = s.integrals.entropy_source;
            EntropyBudgetRow {
                t: s.state.t,
                entropy,
                cumulative_grad_p_l2_sq: s.integrals.grad_p_l2_sq,
                rhs_bound: rhs,
                lhs,
                holds: lhs <= rhs * (1.0 + ENTROPY_SLACK) + ENTROPY_ABS_TOLERANCE,
            }
        })
        .collect();
    let holds = rows.iter().all(|r| r.holds);
    Ok(EntropyBudget { rows, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid1D, GrowthLaw, PressureLaw};

    fn problem() -> Problem {
        Problem::new(
            Grid1D::new(-1.0, 1.0, 200).unwrap(),
            PressureLaw::Singular { epsilon: 0.5 },
            GrowthLaw::new(10.0, 10.0).unwrap(),
        )
    }

    fn state(problem: &Problem, f: impl Fn(f64) -> f64) -> SimState {
        SimState::new(0.0, Field::from_fn(&problem.grid, f))
    }

    #[test]
    fn vacuum_record_is_zero() {
        let pb = problem();
        let rec = record(&pb, &state(&pb, |_| 0.0), None);
        assert_eq!(rec.mass, 0.0);
        assert_eq!(rec.support_radius, 0.0);
        assert_eq!(rec.compl_residual_l1, 0.0);
        assert_eq!(rec.state_law_gap, 0.0);
        assert_eq!(rec.entropy, Some(0.0));
        assert_eq!(rec.ab_min_ratio, None);
    }

    #[test]
    fn ceiling_plateau_record() {
        let pb = problem();
        let cap = pb.density_ceiling();
        let rec = record(
            &pb,
            &state(&pb, |x| if x.abs() <= 0.5 { cap } else { 0.0 }),
            None,
        );
        assert!((rec.max_p - 10.0).abs() < 1e-12);
        assert!((rec.support_radius - 0.5).abs() <= pb.grid.h());
        assert!(rec.state_law_gap <= 1e-12);
    }

    #[test]
    fn residual_vanishes_on_homeostatic_plateau() {
        let pb = problem();
        let cap = pb.density_ceiling();
        // P(n_cap) reproduces P_M only up to rounding
        assert!(complementary_residual(&pb, &state(&pb, |_| cap)) < 1e-10);
        assert_eq!(complementary_residual(&pb, &state(&pb, |_| 0.0)), 0.0);
    }

    #[test]
    fn support_radius_examples() {
        let grid = Grid1D::new(-1.0, 1.0, 200).unwrap();
        assert_eq!(support_radius(&Field::zeros(&grid), &grid, 1e-10), 0.0);
        let p = Field::from_fn(&grid, |x| if x.abs() <= 0.5 { 1.0 } else { 0.0 });
        let r = support_radius(&p, &grid, 1e-10);
        assert!((r - 0.5).abs() <= grid.h() / 2.0);
    }

    #[test]
    fn ab_monitor_signs() {
        let pb = problem();
        let a = state(&pb, |x| if x.abs() < 0.5 { 0.3 } else { 0.0 });
        let mut b = a.clone();
        b.t = 0.1;
        assert_eq!(ab_monitor(&a, &b, &pb.law, 0.01), 0.0);
        let mut grown = state(&pb, |x| if x.abs() < 0.5 { 0.31 } else { 0.0 });
        grown.t = 0.1;
        assert!(ab_monitor(&a, &grown, &pb.law, 0.01) > 0.0);
        let empty = state(&pb, |_| 0.0);
        assert_eq!(ab_monitor(&empty, &empty, &pb.law, 0.01), f64::INFINITY);
    }

    #[test]
    fn entropy_density_limits() {
        assert_eq!(entropy_density(0.5, 0.0), 0.0);
        assert!(entropy_density(0.5, 1e-300).abs() < 1e-290);
        // psi is the derivative of Psi
        let n = 0.3;
        let step = 1e-6;
        let fd = (entropy_density(0.5, n + step) - entropy_density(0.5, n - step)) / (2.0 * step);
        assert!((fd - entropy_derivative(0.5, n)).abs() < 1e-8);
    }

    #[test]
    fn weak_residual_vanishes_on_vacuum() {
        let pb = problem();
        assert_eq!(complementary_residual_weak(&pb, &state(&pb, |_| 0.0)), 0.0);
    }
}
