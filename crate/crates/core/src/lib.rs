//! Numerical laboratory for tissue growth under a singular pressure law
//! `p = eps n / (1 - n)`, and for its incompressible limit `eps -> 0`
//! towards a Hele-Shaw free boundary problem.
//!
//! * [`model`]: pressure and growth laws, grid, state.
//! * [`solver`]: explicit upwind and semi-implicit Newton integrators.
//! * [`diagnostics`]: discrete versions of the a-priori estimates.
//! * [`hele_shaw`]: exact 1D limit solution used as a reference.
//! * [`experiments`]: the studies built on top of the above.
//! * [`io`]: configuration files and plain-text outputs.

// `!(x > 0.0)` is how validation rejects NaN along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// the tridiagonal sweeps read better with explicit indices
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod config;
pub mod diagnostics;
pub mod experiments;
pub mod hele_shaw;
pub mod io;
pub mod model;
pub mod solver;

pub use config::{InitialProfile, Integrator, NewtonSettings, RunConfig, ValidationError};
pub use diagnostics::{BarrierSpec, DiagnosticsRecord};
pub use hele_shaw::FrontState;
pub use model::{Field, Grid1D, GrowthLaw, ModelError, PressureLaw, SimState};
pub use solver::{ExplicitStepper, Problem, SolverError, StepReport, Trajectory};
