//! Time integration on the truncated 1D grid with no-flux boundaries.
//!
//! Two schemes share the [`Problem`] description:
//! * [`step_explicit_upwind`], a monotone upwind finite-volume scheme, which
//!   carries the discrete comparison principle;
//! * [`step_semi_implicit`], Newton on the diffusive form, which is not
//!   restricted by the parabolic CFL bound and is used for small `eps`.

mod explicit;
mod semi_implicit;
mod tridiag;

pub(crate) use explicit::active_window;
use explicit::{extrema, nonzero_extent};
pub use tridiag::solve_tridiagonal;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Integrator, NewtonSettings, RunConfig, ValidationError};
use crate::diagnostics::{self, DiagnosticsRecord, SUPPORT_THRESHOLD};
use crate::model::{
    Field, Grid1D, GrowthLaw, ModelError, PressureLaw, SimState, SINGULARITY_GUARD,
};
use explicit::UpwindWorkspace;
use semi_implicit::{NewtonOutcome, NewtonWorkspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("time step {dt:e} exceeds the CFL bound {limit:e} at t = {t}")]
    CflViolation { t: f64, dt: f64, limit: f64 },
    #[error("density {n} at cell {cell} left the admissible range at t = {t}")]
    OverlapViolation { t: f64, cell: usize, n: f64 },
    #[error("Newton did not reach the tolerance at t = {t} (dt = {dt:e}, residual {residual:e} after {iterations} iterations)")]
    NewtonDiverged {
        t: f64,
        dt: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("pressure support reached the domain boundary at t = {t}")]
    DomainExhausted { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ValidationError),
}

impl SolverError {
    /// Simulation time at which the error occurred, when there is one.
    pub fn time(&self) -> Option<f64> {
        match *self {
            Self::CflViolation { t, .. }
            | Self::OverlapViolation { t, .. }
            | Self::NewtonDiverged { t, .. }
            | Self::DomainExhausted { t } => Some(t),
            Self::Model(_) | Self::Config(_) => None,
        }
    }
}

/// Grid plus constitutive laws: everything a step needs besides the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub grid: Grid1D,
    pub law: PressureLaw,
    pub growth: GrowthLaw,
}

impl Problem {
    pub fn new(grid: Grid1D, law: PressureLaw, growth: GrowthLaw) -> Self {
        Self { grid, law, growth }
    }

    pub fn from_config(config: &RunConfig) -> Self {
        Self::new(config.grid, config.law, config.growth)
    }

    /// Density at which the pressure equals `P_M`; no solution exceeds it.
    pub fn density_ceiling(&self) -> f64 {
        self.law.density_ceiling(self.growth.p_homeostatic)
    }

    /// Applies the pressure law cellwise.
    pub fn pressure_field(&self, state: &SimState) -> Result<Field, ModelError> {
        state.pressure(&self.law)
    }

    pub fn max_diffusivity(&self, n: &[f64]) -> f64 {
        n.iter()
            .map(|&v| self.law.diffusivity_unchecked(v))
            .fold(0.0, f64::max)
    }

    fn cfl_from_diffusivity(&self, max_diffusivity: f64, safety: f64) -> f64 {
        let h = self.grid.h();
        let diffusive = if max_diffusivity > 0.0 {
            h * h / (2.0 * max_diffusivity)
        } else {
            f64::INFINITY
        };
        let g_max = self.growth.max_rate();
        let reactive = if g_max > 0.0 {
            1.0 / g_max
        } else {
            f64::INFINITY
        };
        safety * diffusive.min(reactive)
    }

    /// `safety * min(h^2 / (2 max_i n_i P'(n_i)), 1 / G_m)`.
    ///
    /// Infinite only when there is neither diffusion nor growth.
    pub fn cfl_dt(&self, state: &SimState, safety: f64) -> f64 {
        self.cfl_from_diffusivity(self.max_diffusivity(state.n.values()), safety)
    }

    /// Step cap for the semi-implicit scheme's explicit reaction term:
    /// `safety * min(1 / G_m, 1 / (g H'(n_max)))`, where `n_max` is the
    /// density ceiling. Below it `n -> n + dt n G(P(n))` is nondecreasing on
    /// `[0, n_max]`, so the ceiling survives the reaction half of the step.
    pub fn reaction_dt_cap(&self, safety: f64) -> f64 {
        let g_max = self.growth.max_rate();
        if g_max == 0.0 {
            return f64::INFINITY;
        }
        let stiff = self.growth.g_slope * self.law.diffusivity_unchecked(self.density_ceiling());
        safety * (1.0 / g_max).min(1.0 / stiff)
    }

    fn check_admissible(
        &self,
        t: f64,
        n: &[f64],
        min_n: f64,
        max_n: f64,
    ) -> Result<(), SolverError> {
        self.check_range(t, n, min_n, max_n)?;
        self.check_boundary(t, n)
    }

    fn check_range(&self, t: f64, n: &[f64], min_n: f64, max_n: f64) -> Result<(), SolverError> {
        let overlap =
            matches!(self.law, PressureLaw::Singular { .. }) && max_n >= 1.0 - SINGULARITY_GUARD;
        if min_n < 0.0 || overlap || !max_n.is_finite() {
            let cell = n
                .iter()
                .position(|&v| {
                    v < 0.0 || !v.is_finite() || (overlap && v >= 1.0 - SINGULARITY_GUARD)
                })
                .unwrap_or(0);
            return Err(SolverError::OverlapViolation {
                t,
                cell,
                n: n[cell],
            });
        }
        Ok(())
    }

    fn check_boundary(&self, t: f64, n: &[f64]) -> Result<(), SolverError> {
        let last = n.len() - 1;
        let touching = [n[0], n[last]]
            .iter()
            .any(|&v| self.law.pressure_unchecked(v) > SUPPORT_THRESHOLD);
        if touching {
            return Err(SolverError::DomainExhausted { t });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dt_used: f64,
    pub newton_iterations: usize,
    pub max_flux: f64,
    pub post_step_min: f64,
    pub post_step_max: f64,
}

/// One explicit upwind step.
///
/// Fails with `CflViolation` if `dt` exceeds [`Problem::cfl_dt`] at safety 1.
/// Unlike [`run`], single steps do not police the domain ends.
pub fn step_explicit_upwind(
    problem: &Problem,
    state: &SimState,
    dt: f64,
) -> Result<(SimState, StepReport), SolverError> {
    step_explicit_with_source(problem, state, dt, None)
}

fn step_explicit_with_source(
    problem: &Problem,
    state: &SimState,
    dt: f64,
    source: Option<&[f64]>,
) -> Result<(SimState, StepReport), SolverError> {
    let limit = problem.cfl_dt(state, 1.0);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(SolverError::CflViolation {
            t: state.t,
            dt,
            limit,
        });
    }
    let n = state.n.values();
    let mut out = vec![0.0; n.len()];
    let k = UpwindWorkspace::default().advance(
        problem,
        n,
        nonzero_extent(n),
        dt,
        source,
        &mut out,
        None,
    );
    let t = state.t + dt;
    problem.check_range(t, &out, k.min_n, k.max_n)?;
    Ok((
        SimState::new(t, Field::for_grid(&problem.grid, out)?),
        StepReport {
            dt_used: dt,
            newton_iterations: 0,
            max_flux: max_face_flux(problem, state),
            post_step_min: k.min_n,
            post_step_max: k.max_n,
        },
    ))
}

/// One semi-implicit step with exactly the given `dt` (no halving).
pub fn step_semi_implicit(
    problem: &Problem,
    state: &SimState,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<(SimState, StepReport), SolverError> {
    let n = state.n.values();
    let mut out = vec![0.0; n.len()];
    let iterations = semi_implicit_attempt(
        &mut NewtonWorkspace::default(),
        problem,
        state.t,
        n,
        dt,
        None,
        settings,
        &mut out,
    )?;
    let t = state.t + dt;
    let (min_n, max_n) = extrema(&out);
    problem.check_range(t, &out, min_n, max_n)?;
    Ok((
        SimState::new(t, Field::for_grid(&problem.grid, out)?),
        StepReport {
            dt_used: dt,
            newton_iterations: iterations,
            max_flux: max_face_flux(problem, state),
            post_step_min: min_n,
            post_step_max: max_n,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn semi_implicit_attempt(
    workspace: &mut NewtonWorkspace,
    problem: &Problem,
    t: f64,
    n: &[f64],
    dt: f64,
    source: Option<&[f64]>,
    settings: &NewtonSettings,
    out: &mut [f64],
) -> Result<usize, SolverError> {
    match workspace.advance(problem, n, dt, source, settings, out) {
        NewtonOutcome::Converged { iterations, .. } => Ok(iterations),
        NewtonOutcome::Diverged {
            iterations,
            residual,
        } => Err(SolverError::NewtonDiverged {
            t,
            dt,
            residual,
            iterations,
        }),
    }
}

fn max_face_flux(problem: &Problem, state: &SimState) -> f64 {
    let n = state.n.values();
    let h = problem.grid.h();
    n.windows(2)
        .map(|w| {
            let v =
                (problem.law.pressure_unchecked(w[0]) - problem.law.pressure_unchecked(w[1])) / h;
            let upwind = if v >= 0.0 { w[0] } else { w[1] };
            (upwind * v).abs()
        })
        .fold(0.0, f64::max)
}

/// Time integrals accumulated step by step during a run (left-endpoint
/// rule, evaluated every `entropy_stride` steps and at every snapshot).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunIntegrals {
    /// `int_0^t h sum ((p[i+1] - p[i]) / h)^2 dt`
    pub grad_p_l2_sq: f64,
    /// `int_0^t G_m h sum n |psi(n)| dt`, the entropy source bound.
    pub entropy_source: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: SimState,
    pub diagnostics: DiagnosticsRecord,
    pub integrals: RunIntegrals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem: Problem,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub newton_iterations: usize,
    pub smallest_dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &SimState {
        &self
            .snapshots
            .last()
            .expect("trajectory has a snapshot")
            .state
    }

    pub fn final_record(&self) -> &DiagnosticsRecord {
        &self
            .snapshots
            .last()
            .expect("trajectory has a snapshot")
            .diagnostics
    }

    pub fn records(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.snapshots.iter().map(|s| &s.diagnostics)
    }

    pub fn max_density(&self) -> f64 {
        self.records()
            .map(|r| r.max_n)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_pressure(&self) -> f64 {
        self.records()
            .map(|r| r.max_p)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Source term `S(t, x)` added as `dt * S(t_old, x_i)` each step.
pub type Source<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

pub fn run(config: &RunConfig) -> Result<Trajectory, SolverError> {
    config.validate()?;
    Runner::new(config, config.initial_state(), true).run(None)
}

pub fn run_with_source(config: &RunConfig, source: Source<'_>) -> Result<Trajectory, SolverError> {
    config.validate()?;
    Runner::new(config, config.initial_state(), true).run(Some(source))
}

/// Runs from `initial` instead of the configured profile and without the
/// compact-support safeguards: no boundary-margin validation and no
/// `DomainExhausted` check. Meant for manufactured solutions that do not
/// vanish near the domain ends; the no-flux boundary still applies.
pub fn run_unbounded(
    config: &RunConfig,
    initial: SimState,
    source: Option<Source<'_>>,
) -> Result<Trajectory, SolverError> {
    config.validate_parameters()?;
    if initial.n.len() != config.grid.num_cells() {
        return Err(ModelError::LengthMismatch {
            expected: config.grid.num_cells(),
            got: initial.n.len(),
        }
        .into());
    }
    Runner::new(config, initial, false).run(source)
}

/// Explicit upwind stepping on a single state, reusing buffers and the
/// nonzero extent between steps. [`run`] does the same with snapshots and
/// diagnostics on top.
#[derive(Debug, Clone)]
pub struct ExplicitStepper {
    problem: Problem,
    workspace: UpwindWorkspace,
    t: f64,
    n: Vec<f64>,
    extent: Option<(usize, usize)>,
    spare: Vec<f64>,
    spare_extent: Option<(usize, usize)>,
    max_diffusivity: f64,
}

impl ExplicitStepper {
    pub fn new(problem: Problem, state: SimState) -> Result<Self, SolverError> {
        if state.n.len() != problem.grid.num_cells() {
            return Err(ModelError::LengthMismatch {
                expected: problem.grid.num_cells(),
                got: state.n.len(),
            }
            .into());
        }
        let n = state.n.into_inner();
        Ok(Self {
            problem,
            workspace: UpwindWorkspace::default(),
            t: state.t,
            extent: nonzero_extent(&n),
            spare: vec![0.0; n.len()],
            spare_extent: None,
            max_diffusivity: problem.max_diffusivity(&n),
            n,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> &[f64] {
        &self.n
    }

    /// First and last nonzero cell.
    pub fn support(&self) -> Option<(usize, usize)> {
        self.extent
    }

    pub fn state(&self) -> SimState {
        SimState::new(
            self.t,
            Field::for_grid(&self.problem.grid, self.n.clone())
                .expect("length fixed at construction"),
        )
    }

    /// Same as [`Problem::cfl_dt`] for the current density.
    pub fn cfl_dt(&self, safety: f64) -> f64 {
        self.problem
            .cfl_from_diffusivity(self.max_diffusivity, safety)
    }

    /// Advances by `dt`; on error the state is left unchanged.
    pub fn step(&mut self, dt: f64) -> Result<(), SolverError> {
        let limit = self.cfl_dt(1.0);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation {
                t: self.t,
                dt,
                limit,
            });
        }
        let k = self.workspace.advance(
            &self.problem,
            &self.n,
            self.extent,
            dt,
            None,
            &mut self.spare,
            self.spare_extent,
        );
        self.spare_extent = k.extent;
        let t = self.t + dt;
        self.problem
            .check_admissible(t, &self.spare, k.min_n, k.max_n)?;
        std::mem::swap(&mut self.n, &mut self.spare);
        std::mem::swap(&mut self.extent, &mut self.spare_extent);
        self.t = t;
        self.max_diffusivity = k.max_diffusivity;
        Ok(())
    }
}

struct Runner<'c> {
    config: &'c RunConfig,
    problem: Problem,
    initial: Option<SimState>,
    guard_boundary: bool,
    upwind: UpwindWorkspace,
    newton: NewtonWorkspace,
}

struct EntropyAccumulator {
    integrals: RunIntegrals,
    last_t: f64,
    last_grad: f64,
    last_source: f64,
}

impl EntropyAccumulator {
    fn new(problem: &Problem, n: &[f64], t: f64) -> Self {
        let mut acc = Self {
            integrals: RunIntegrals::default(),
            last_t: t,
            last_grad: 0.0,
            last_source: 0.0,
        };
        acc.sample(problem, n, t);
        acc
    }

    fn sample(&mut self, problem: &Problem, n: &[f64], t: f64) {
        let dt = t - self.last_t;
        self.integrals.grad_p_l2_sq += dt * self.last_grad;
        self.integrals.entropy_source += dt * self.last_source;
        self.last_t = t;
        self.last_grad = diagnostics::gradient_energy(problem, n);
        self.last_source = diagnostics::entropy_source_bound(problem, n);
    }
}

impl<'c> Runner<'c> {
    fn new(config: &'c RunConfig, initial: SimState, guard_boundary: bool) -> Self {
        Self {
            config,
            problem: Problem::from_config(config),
            initial: Some(initial),
            guard_boundary,
            upwind: UpwindWorkspace::default(),
            newton: NewtonWorkspace::default(),
        }
    }

    fn check(&self, t: f64, n: &[f64], min_n: f64, max_n: f64) -> Result<(), SolverError> {
        self.problem.check_range(t, n, min_n, max_n)?;
        if self.guard_boundary {
            self.problem.check_boundary(t, n)?;
        }
        Ok(())
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let cfg = self.config;
        let mut times = vec![0.0];
        let mut k = 1u64;
        loop {
            let t = k as f64 * cfg.snapshot_interval;
            if t >= cfg.final_time * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
        if cfg.final_time > 0.0 {
            times.push(cfg.final_time);
        }
        times
    }

    fn snapshot(
        &self,
        t: f64,
        n: &[f64],
        prev: Option<(&[f64], f64)>,
        integrals: RunIntegrals,
    ) -> Result<Snapshot, SolverError> {
        let state = SimState::new(t, Field::for_grid(&self.problem.grid, n.to_vec())?);
        let prev_state = prev
            .map(|(values, dt)| -> Result<_, SolverError> {
                Ok((
                    SimState::new(
                        t - dt,
                        Field::for_grid(&self.problem.grid, values.to_vec())?,
                    ),
                    dt,
                ))
            })
            .transpose()?;
        let mut diagnostics = diagnostics::record(
            &self.problem,
            &state,
            prev_state.as_ref().map(|(s, dt)| (s, *dt)),
        );
        diagnostics.t = t;
        Ok(Snapshot {
            state,
            diagnostics,
            integrals,
        })
    }

    fn run(mut self, source: Option<Source<'_>>) -> Result<Trajectory, SolverError> {
        let cfg = self.config;
        let problem = self.problem;
        let initial = self.initial.take().expect("runner is used once");
        let cells = problem.grid.num_cells();
        let centers: Vec<f64> = problem.grid.centers().collect();

        let start = initial.t;
        let mut t = start;
        let mut cur = initial.n.into_inner();
        let mut next = vec![0.0; cells];
        // nonzero extents of `cur` and `next`; `next` starts out all zero
        let mut cur_extent = nonzero_extent(&cur);
        let mut next_extent = None;
        let mut src = vec![0.0; cells];
        let (min0, max0) = extrema(&cur);
        self.check(t, &cur, min0, max0)?;

        let mut entropy = EntropyAccumulator::new(&problem, &cur, t);
        let mut snapshots = vec![self.snapshot(t, &cur, None, entropy.integrals)?];
        let mut steps = 0usize;
        let mut newton_total = 0usize;
        let mut smallest_dt = f64::INFINITY;
        let mut max_diffusivity = problem.max_diffusivity(&cur);
        let stride = cfg.entropy_stride.max(1);
        let semi_dt = match cfg.integrator {
            Integrator::SemiImplicit { dt } => {
                Some(dt.min(problem.reaction_dt_cap(cfg.cfl_safety)))
            }
            Integrator::ExplicitUpwind => None,
        };

        for &offset in &self.snapshot_times()[1..] {
            let target = start + offset;
            let mut last_dt = 0.0;
            while t < target {
                let remaining = target - t;
                let mut dt = match semi_dt {
                    None => problem.cfl_from_diffusivity(max_diffusivity, cfg.cfl_safety),
                    Some(dt) => dt,
                };
                let lands = dt >= remaining * (1.0 - 1e-9);
                if lands {
                    dt = remaining;
                }
                if let Some(s) = source {
                    for (slot, &x) in src.iter_mut().zip(&centers) {
                        *slot = s(t, x);
                    }
                }
                let src_ref = source.map(|_| src.as_slice());

                let (min_n, max_n) = match semi_dt {
                    None => {
                        let k = self.upwind.advance(
                            &problem,
                            &cur,
                            cur_extent,
                            dt,
                            src_ref,
                            &mut next,
                            next_extent,
                        );
                        max_diffusivity = k.max_diffusivity;
                        next_extent = k.extent;
                        (k.min_n, k.max_n)
                    }
                    Some(_) => {
                        let mut attempt = 0;
                        loop {
                            match semi_implicit_attempt(
                                &mut self.newton,
                                &problem,
                                t,
                                &cur,
                                dt,
                                src_ref,
                                &cfg.newton,
                                &mut next,
                            ) {
                                Ok(iterations) => {
                                    newton_total += iterations;
                                    break;
                                }
                                Err(_) if attempt < cfg.newton.max_halvings => {
                                    attempt += 1;
                                    dt *= 0.5;
                                }
                                Err(err) => return Err(err),
                            }
                        }
                        next_extent = nonzero_extent(&next);
                        extrema(&next)
                    }
                };
                let landed = lands && dt == remaining;
                let t_new = if landed { target } else { t + dt };
                self.check(t_new, &next, min_n, max_n)?;

                std::mem::swap(&mut cur, &mut next);
                std::mem::swap(&mut cur_extent, &mut next_extent);
                t = t_new;
                last_dt = dt;
                steps += 1;
                smallest_dt = smallest_dt.min(dt);
                if steps % stride == 0 && t < target {
                    entropy.sample(&problem, &cur, t);
                }
            }
            entropy.sample(&problem, &cur, t);
            // `next` still holds the state one step back
            snapshots.push(self.snapshot(t, &cur, Some((&next, last_dt)), entropy.integrals)?);
        }

        Ok(Trajectory {
            problem,
            snapshots,
            steps,
            newton_iterations: newton_total,
            smallest_dt,
        })
    }
}
