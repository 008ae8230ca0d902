//! Diffusive-form step: solve `m - dt L H(m) = b` with
//! `b = n + dt n G(P(n)) (+ dt S)` by Newton on the tridiagonal system.
//! `L` is the 3-point Laplacian with mirrored ghost cells (no flux).

use super::tridiag::solve_tridiagonal;
use super::Problem;
use crate::config::NewtonSettings;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NewtonOutcome {
    Converged { iterations: usize, residual: f64 },
    Diverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Default, Clone)]
pub(crate) struct NewtonWorkspace {
    rhs: Vec<f64>,
    potential: Vec<f64>,
    slope: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    delta: Vec<f64>,
    scratch: Vec<f64>,
}

impl NewtonWorkspace {
    /// On success `out` holds the new density. `out` is used as the Newton
    /// iterate and is left in an unspecified state on divergence.
    pub(crate) fn advance(
        &mut self,
        problem: &Problem,
        n: &[f64],
        dt: f64,
        source: Option<&[f64]>,
        settings: &NewtonSettings,
        out: &mut [f64],
    ) -> NewtonOutcome {
        let cells = n.len();
        let law = problem.law;
        let growth = problem.growth;
        let ceiling = problem.density_ceiling();
        let h2 = problem.grid.h() * problem.grid.h();
        let coupling = dt / h2;

        for buf in [
            &mut self.rhs,
            &mut self.potential,
            &mut self.slope,
            &mut self.lower,
            &mut self.diag,
            &mut self.upper,
            &mut self.delta,
            &mut self.scratch,
        ] {
            buf.resize(cells, 0.0);
        }

        for i in 0..cells {
            let p = law.pressure_unchecked(n[i]);
            let mut b = n[i] + dt * n[i] * growth.rate(p);
            if let Some(s) = source {
                b += dt * s[i];
            }
            self.rhs[i] = b;
            out[i] = b.clamp(0.0, ceiling);
        }

        let mut residual = self.residual(problem, out, coupling);
        let mut iterations = 0;
        while residual > settings.tolerance {
            if iterations == settings.max_iterations {
                return NewtonOutcome::Diverged {
                    iterations,
                    residual,
                };
            }
            iterations += 1;
            for i in 0..cells {
                self.slope[i] = law.diffusivity_unchecked(out[i]);
            }
            for i in 0..cells {
                let left = if i > 0 { self.slope[i - 1] } else { 0.0 };
                let right = if i + 1 < cells {
                    self.slope[i + 1]
                } else {
                    0.0
                };
                let neighbours = usize::from(i > 0) + usize::from(i + 1 < cells);
                self.lower[i] = -coupling * left;
                self.upper[i] = -coupling * right;
                self.diag[i] = 1.0 + coupling * neighbours as f64 * self.slope[i];
                // residual() left R(m) in delta; Newton solves J d = -R
                self.delta[i] = -self.delta[i];
            }
            solve_tridiagonal(
                &self.lower,
                &self.diag,
                &self.upper,
                &mut self.delta,
                &mut self.scratch,
            );
            for i in 0..cells {
                out[i] = (out[i] + self.delta[i]).clamp(0.0, ceiling);
            }
            residual = self.residual(problem, out, coupling);
            if !residual.is_finite() {
                return NewtonOutcome::Diverged {
                    iterations,
                    residual,
                };
            }
        }
        NewtonOutcome::Converged {
            iterations,
            residual,
        }
    }

    /// Fills `delta` with `R(m) = m - dt L H(m) - b` and returns its max norm.
    fn residual(&mut self, problem: &Problem, m: &[f64], coupling: f64) -> f64 {
        let cells = m.len();
        let law = problem.law;
        for i in 0..cells {
            self.potential[i] = law.potential_unchecked(m[i]);
        }
        let hp = &self.potential;
        let mut norm = 0.0f64;
        for i in 0..cells {
            let left = if i > 0 { hp[i - 1] } else { hp[i] };
            let right = if i + 1 < cells { hp[i + 1] } else { hp[i] };
            let r = m[i] - coupling * (left - 2.0 * hp[i] + right) - self.rhs[i];
            self.delta[i] = r;
            norm = norm.max(r.abs());
        }
        norm
    }
}
