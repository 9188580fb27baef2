//! Fourth-order finite differences on uniform grids.

/// Centered first-derivative stencil for offsets 1, 2.
pub const D1: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];
/// Centered second-derivative stencil for offsets 0, 1, 2.
pub const D2: [f64; 3] = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// ∂_x v; fourth order inside, second order one-sided at the two outer points.
pub fn d1(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if i >= 2 && i + 2 < n {
            (D1[0] * (v[i + 1] - v[i - 1]) + D1[1] * (v[i + 2] - v[i - 2])) / h
        } else if i + 2 < n {
            (-3.0 * v[i] + 4.0 * v[i + 1] - v[i + 2]) / (2.0 * h)
        } else {
            (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h)
        };
    }
    out
}

/// ∂²_x v; fourth order inside, zero at the two outer points on each side.
pub fn d2_apply(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (D2[0] * v[i] + D2[1] * (v[i + 1] + v[i - 1]) + D2[2] * (v[i + 2] + v[i - 2])) / (h * h);
    }
    out
}

/// Trapezoid rule.
pub fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}
