//! Reference computations that share no code with the library.
#![allow(dead_code)]

/// `H(n) = int_0^n s P'(s) ds` for `P(n) = eps n / (1 - n)`.
pub fn singular_potential(epsilon: f64, n: f64) -> f64 {
    epsilon * (n / (1.0 - n) + (1.0 - n).ln())
}

/// Solves `-p'' = g (P_M - p)` on `[-L/2, L/2]` with `p = 0` at both ends
/// by central differences on `cells` intervals (Thomas algorithm). Returns
/// the nodal values, endpoints included.
pub fn bvp_fd(length: f64, g: f64, p_max: f64, cells: usize) -> Vec<f64> {
    let dx = length / cells as f64;
    let m = cells - 1;
    let diag = 2.0 / (dx * dx) + g;
    let off = -1.0 / (dx * dx);
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let rhs = g * p_max;
        let denom = if i == 0 { diag } else { diag - off * c[i - 1] };
        c[i] = off / denom;
        d[i] = if i == 0 {
            rhs / denom
        } else {
            (rhs - off * d[i - 1]) / denom
        };
    }
    let mut p = vec![0.0; cells + 1];
    for i in (0..m).rev() {
        p[i + 1] = d[i] - if i + 1 < m { c[i] * p[i + 2] } else { 0.0 };
    }
    p
}

/// Richardson-extrapolated BVP value at `x` (which must be a node of the
/// coarse grid with `cells` intervals).
pub fn bvp_value(length: f64, g: f64, p_max: f64, cells: usize, x: f64) -> f64 {
    let coarse = bvp_fd(length, g, p_max, cells);
    let fine = bvp_fd(length, g, p_max, 2 * cells);
    let k = ((x + 0.5 * length) / length * cells as f64).round() as usize;
    (4.0 * fine[2 * k] - coarse[k]) / 3.0
}

/// `-p'(L/2)` from a second-order one-sided difference on the BVP
/// solution, Richardson-extrapolated over two resolutions.
pub fn bvp_endpoint_slope(length: f64, g: f64, p_max: f64, cells: usize) -> f64 {
    let slope = |cells: usize| {
        let p = bvp_fd(length, g, p_max, cells);
        let dx = length / cells as f64;
        let k = cells;
        -(3.0 * p[k] - 4.0 * p[k - 1] + p[k - 2]) / (2.0 * dx)
    };
    (4.0 * slope(2 * cells) - slope(cells)) / 3.0
}

/// Exact front length: with `u = sqrt(g) L / 2` the front law reads
/// `u' = g P_M tanh u`, so `sinh u` grows like `exp(g P_M t)`.
pub fn front_length_exact(length0: f64, g: f64, p_max: f64, t: f64) -> f64 {
    let k = g.sqrt();
    2.0 / k * ((0.5 * k * length0).sinh() * (g * p_max * t).exp()).asinh()
}

/// Manufactured density `0.5 + 0.3 e^(-t) cos(pi x / 4)`.
pub fn manufactured(t: f64, x: f64) -> f64 {
    0.5 + 0.3 * (-t).exp() * (std::f64::consts::PI * x / 4.0).cos()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
