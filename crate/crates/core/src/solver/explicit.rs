//! Monotone upwind finite-volume step for `d_t n - d_x(n d_x p) = n G(p)`.
//!
//! Face velocity is `v = -(p[i+1] - p[i]) / h` and the face density is taken
//! from the upwind cell. The update is written as
//!
//! ```text
//! n_new[i] = n[i] * (1 + dt G_i - dt/h (v_out)) + dt/h (inflow)
//! ```
//!
//! so that under the CFL bound every term is a product of nonnegative
//! numbers and positivity holds bit for bit, not just up to rounding.
//!
//! Only the cells that can change are visited: the nonzero extent of the
//! density padded by one cell on each side.

use super::Problem;
use crate::model::{pow_u32, small_exponent, PressureLaw};

/// Per-step measurements produced by the kernel alongside the new density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KernelOutput {
    pub min_n: f64,
    pub max_n: f64,
    pub max_diffusivity: f64,
    /// First and last nonzero cell of the new density.
    pub extent: Option<(usize, usize)>,
}

/// Scratch buffer reused across steps.
#[derive(Debug, Default, Clone)]
pub(crate) struct UpwindWorkspace {
    pressure: Vec<f64>,
}

/// First and last nonzero cell.
pub(crate) fn nonzero_extent(n: &[f64]) -> Option<(usize, usize)> {
    let first = n.iter().position(|&v| v != 0.0)?;
    let last = n.iter().rposition(|&v| v != 0.0)?;
    Some((first, last))
}

/// Indices `[lo, hi]` of the cells that can change this step: the nonzero
/// cells padded by one on each side. `None` when the density vanishes.
pub(crate) fn active_window(n: &[f64]) -> Option<(usize, usize)> {
    nonzero_extent(n).map(|e| pad(e, n.len()))
}

fn pad((first, last): (usize, usize), cells: usize) -> (usize, usize) {
    (first.saturating_sub(1), (last + 1).min(cells - 1))
}

impl UpwindWorkspace {
    /// Writes the updated density into `out`.
    ///
    /// `extent` is the nonzero extent of `n` and `out_extent` the nonzero
    /// extent of whatever `out` currently holds; `out` must be zero outside
    /// `out_extent`. On return `out` is zero outside the returned extent.
    /// `source` is added as `dt * source[i]`, in which case every cell is
    /// active.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn advance(
        &mut self,
        problem: &Problem,
        n: &[f64],
        extent: Option<(usize, usize)>,
        dt: f64,
        source: Option<&[f64]>,
        out: &mut [f64],
        out_extent: Option<(usize, usize)>,
    ) -> KernelOutput {
        let cells = n.len();
        if let Some((a, b)) = out_extent {
            out[a..=b].fill(0.0);
        }
        let window = match source {
            Some(_) => Some((0, cells - 1)),
            None => extent.map(|e| pad(e, cells)),
        };
        let Some((lo, hi)) = window else {
            return KernelOutput {
                min_n: 0.0,
                max_n: 0.0,
                max_diffusivity: 0.0,
                extent: None,
            };
        };

        self.pressure.resize(cells, 0.0);
        let p = &mut self.pressure[lo..=hi];
        let nw = &n[lo..=hi];
        match problem.law {
            PressureLaw::Singular { epsilon } => {
                for (pi, &ni) in p.iter_mut().zip(nw) {
                    *pi = epsilon * ni / (1.0 - ni);
                }
            }
            // same operations as `pressure_unchecked`, with the exponent
            // dispatch hoisted out of the loop
            PressureLaw::PowerLaw { gamma } => {
                let c = gamma / (gamma - 1.0);
                match small_exponent(gamma - 1.0) {
                    Some(k) => fill_power(p, nw, c, k),
                    None => {
                        for (pi, &ni) in p.iter_mut().zip(nw) {
                            *pi = problem.law.pressure_unchecked(ni);
                        }
                    }
                }
            }
        }
        update(problem, nw, p, dt, &mut out[lo..=hi]);
        if let Some(s) = source {
            for (o, &si) in out.iter_mut().zip(s) {
                *o += dt * si;
            }
        }

        let (mut min_n, max_n) = extrema(&out[lo..=hi]);
        if lo > 0 || hi + 1 < cells {
            min_n = min_n.min(0.0);
        }
        // the diffusivity is increasing in n for both laws
        let max_diffusivity = problem.law.diffusivity_unchecked(max_n.max(0.0));
        let first = out[lo..=hi].iter().position(|&v| v != 0.0).map(|k| lo + k);
        let last = out[lo..=hi].iter().rposition(|&v| v != 0.0).map(|k| lo + k);
        KernelOutput {
            min_n,
            max_n,
            max_diffusivity,
            extent: first.zip(last),
        }
    }
}

/// Updates the window `n` (with pressures `p`) into `out`. The faces at both
/// ends of the window carry no flux: either they are domain boundaries or
/// both neighbouring densities vanish.
fn update(problem: &Problem, n: &[f64], p: &[f64], dt: f64, out: &mut [f64]) {
    let inv_h = 1.0 / problem.grid.h();
    let lambda = dt / problem.grid.h();
    let dt_g = dt * problem.growth.g_slope;
    let p_m = problem.growth.p_homeostatic;
    let cell = |n_left: f64, n_mid: f64, n_right: f64, vl: f64, vr: f64, p_mid: f64| {
        let outflow = positive(vr) - negative(vl);
        let inflow = positive(vl) * n_left - negative(vr) * n_right;
        let factor = 1.0 + dt_g * positive(p_m - p_mid) - lambda * outflow;
        n_mid * factor + lambda * inflow
    };
    let w = n.len();
    if w == 1 {
        out[0] = cell(0.0, n[0], 0.0, 0.0, 0.0, p[0]);
        return;
    }
    let face = |k: usize| (p[k - 1] - p[k]) * inv_h;
    out[0] = cell(0.0, n[0], n[1], 0.0, face(1), p[0]);
    out[w - 1] = cell(n[w - 2], n[w - 1], 0.0, face(w - 1), 0.0, p[w - 1]);
    if w > 2 {
        // equal-length slices so the loop carries no bounds checks
        let m = w - 2;
        let (nl, nc, nr) = (&n[..m], &n[1..=m], &n[2..]);
        let (pl, pc, pr) = (&p[..m], &p[1..=m], &p[2..]);
        let o = &mut out[1..=m];
        for k in 0..m {
            let vl = (pl[k] - pc[k]) * inv_h;
            let vr = (pc[k] - pr[k]) * inv_h;
            o[k] = cell(nl[k], nc[k], nr[k], vl, vr, pc[k]);
        }
    }
}

// Select forms rather than f64::max/min: they lower to one vector
// instruction without the NaN fix-up. Inputs are finite here.
#[inline(always)]
fn positive(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

#[inline(always)]
fn negative(v: f64) -> f64 {
    if v < 0.0 {
        v
    } else {
        0.0
    }
}

/// Minimum and maximum of a nonempty slice. Eight independent accumulators
/// keep the reduction from serialising on the compare latency.
pub(crate) fn extrema(xs: &[f64]) -> (f64, f64) {
    let mut lo = [f64::INFINITY; 8];
    let mut hi = [f64::NEG_INFINITY; 8];
    let chunks = xs.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for j in 0..8 {
            lo[j] = if c[j] < lo[j] { c[j] } else { lo[j] };
            hi[j] = if c[j] > hi[j] { c[j] } else { hi[j] };
        }
    }
    let mut min = tail.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut max = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for j in 0..8 {
        min = min.min(lo[j]);
        max = max.max(hi[j]);
    }
    (min, max)
}

/// `p = c n^k`. Exponents up to 32 get a copy of the loop with `k` fixed at
/// compile time, which unrolls `pow_u32` and lets the loop vectorise.
fn fill_power(p: &mut [f64], n: &[f64], c: f64, k: u32) {
    fn fixed<const K: u32>(p: &mut [f64], n: &[f64], c: f64) {
        for (pi, &ni) in p.iter_mut().zip(n) {
            *pi = c * pow_u32(ni, K);
        }
    }
    macro_rules! dispatch {
        ($($k:literal)*) => {
            match k {
                $($k => fixed::<$k>(p, n, c),)*
                _ => {
                    for (pi, &ni) in p.iter_mut().zip(n) {
                        *pi = c * pow_u32(ni, k);
                    }
                }
            }
        };
    }
    dispatch!(1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20 21 22 23 24 25 26 27 28 29 30 31 32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_pads_nonzero_cells() {
        assert_eq!(active_window(&[0.0, 0.0, 0.0]), None);
        assert_eq!(active_window(&[0.0, 0.0, 1.0, 0.0, 0.0]), Some((1, 3)));
        assert_eq!(active_window(&[1.0, 0.0, 0.0]), Some((0, 1)));
        assert_eq!(active_window(&[0.0, 0.0, 1.0]), Some((1, 2)));
    }

    #[test]
    fn extrema_matches_fold() {
        for len in 1..40 {
            let xs: Vec<f64> = (0..len).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(extrema(&xs), (lo, hi));
        }
    }
}
