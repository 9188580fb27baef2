//! The Newton potential `𝒱_c(ξ) = c²ξ² − 4(r0²+ξ)F(r0²+ξ)` and the turning
//! value `ξ_c`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    NoWave,
    DarkWithXi,
    BubbleAbove,
    Kink,
    Sonic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceVerdict {
    pub status: Status,
    pub xi_c: Option<f64>,
    /// A zero of `𝒱_c` on the other side of the origin was also found.
    pub further_roots: bool,
    pub diagnostic: Option<String>,
}

impl ExistenceVerdict {
    fn none(diag: impl Into<String>) -> Self {
        ExistenceVerdict { status: Status::NoWave, xi_c: None, further_roots: false, diagnostic: Some(diag.into()) }
    }

    pub fn has_wave(&self) -> bool {
        self.xi_c.is_some()
    }
}

/// `𝒱_c(ξ)/ξ²`; at ξ = 0 this is `c² − c_s²`.
pub fn w_c(model: &NonlinearityModel, c: f64, xi: f64) -> f64 {
    c * c - 4.0 * (model.r2() + xi) * model.g(xi)
}

/// `q'(s)` for `q(s) = (r0² + s) g(s)`, so that `−W_c(η) = 4(q(η) − q(ξ))`.
pub fn q_prime(model: &NonlinearityModel, s: f64) -> f64 {
    let rho = model.r2() + s;
    model.g(s) * (1.0 - 2.0 * rho / s) - rho * model.f(rho) / (s * s)
}

/// `−W_c(η)` for η between the root ξ of `W_c` and 0. Within `0.05|ξ|` of
/// the root it integrates `q'` instead of differencing.
pub fn neg_w_near(model: &NonlinearityModel, c: f64, xi: f64, eta: f64) -> f64 {
    if (eta - xi).abs() < 0.05 * xi.abs() {
        4.0 * crate::quad::gk(|s| q_prime(model, s), xi, eta)
    } else {
        -w_c(model, c, eta)
    }
}

pub fn v_c_unchecked(model: &NonlinearityModel, c: f64, xi: f64) -> f64 {
    xi * xi * w_c(model, c, xi)
}

pub fn v_c_prime_unchecked(model: &NonlinearityModel, c: f64, xi: f64) -> f64 {
    let rho = model.r2() + xi;
    2.0 * c * c * xi - 4.0 * xi * xi * model.g(xi) + 4.0 * rho * model.f(rho)
}

fn check_xi(model: &NonlinearityModel, xi: f64) -> Result<()> {
    if !(xi >= -model.r2()) {
        return Err(Error::Domain(format!("xi = {xi} below -r0^2")));
    }
    Ok(())
}

pub fn v_c(model: &NonlinearityModel, c: f64, xi: f64) -> Result<f64> {
    check_xi(model, xi)?;
    Ok(v_c_unchecked(model, c, xi))
}

pub fn v_c_prime(model: &NonlinearityModel, c: f64, xi: f64) -> Result<f64> {
    check_xi(model, xi)?;
    Ok(v_c_prime_unchecked(model, c, xi))
}

/// d/dξ of `w_c`.
pub fn w_c_prime(model: &NonlinearityModel, c: f64, xi: f64) -> f64 {
    if xi.abs() > 1e-4 * model.r2() {
        (v_c_prime_unchecked(model, c, xi) - 2.0 * xi * w_c(model, c, xi)) / (xi * xi)
    } else {
        let h = 1e-5 * model.r2();
        (w_c(model, c, xi + h) - w_c(model, c, xi - h)) / (2.0 * h)
    }
}

/// Scan options for [`find_xi_c_with`].
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Upper scan bound in units of r0².
    pub upper: f64,
    /// Initial step in units of r0².
    pub step: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { upper: 8.0, step: 1.0 / 512.0 }
    }
}

fn sonic(model: &NonlinearityModel, c: f64) -> bool {
    (c - model.c_s).abs() <= 1e-12 * model.c_s
}

/// First zero of `w_c` along one side, with `w_c < 0` strictly before it.
fn scan_side(model: &NonlinearityModel, c: f64, dir: f64, end: f64, step: f64) -> Option<f64> {
    let n = (end / step).ceil() as usize;
    let at = |k: usize| if k >= n { dir * end } else { dir * step * k as f64 };
    let mut prev = 0.0;
    for k in 1..=n {
        let xi = at(k);
        let w = w_c(model, c, xi);
        if w >= 0.0 {
            if k == 1 && !sonic(model, c) {
                return None;
            }
            if w == 0.0 {
                return Some(xi);
            }
            if k == 1 {
                // sonic: W vanishes at the origin; require W < 0 just off zero
                let probe = dir * step * 1e-3;
                if !(w_c(model, c, probe) < 0.0) {
                    return None;
                }
                prev = probe;
            }
            return Some(refine(model, c, prev, xi));
        }
        prev = xi;
    }
    None
}

fn refine(model: &NonlinearityModel, c: f64, neg: f64, pos: f64) -> f64 {
    let (mut a, mut b) = (neg, pos);
    while (b - a).abs() > 1e-12 * model.r2() {
        let m = 0.5 * (a + b);
        if w_c(model, c, m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let mut x = 0.5 * (a + b);
    for _ in 0..3 {
        let d = w_c_prime(model, c, x);
        if d == 0.0 {
            break;
        }
        let nx = x - w_c(model, c, x) / d;
        if !(nx >= lo - 1e-12 && nx <= hi + 1e-12) {
            break;
        }
        x = nx;
    }
    if x < -model.r2() {
        x = -model.r2();
    }
    x
}

/// Locate the turning value at speed `c` with default scan bounds.
pub fn find_xi_c(model: &NonlinearityModel, c: f64) -> ExistenceVerdict {
    find_xi_c_with(model, c, ScanOptions::default())
}

pub fn find_xi_c_with(model: &NonlinearityModel, c: f64, opts: ScanOptions) -> ExistenceVerdict {
    if !(c >= 0.0) {
        return ExistenceVerdict::none("negative speed");
    }
    if c > model.c_s && !sonic(model, c) {
        return ExistenceVerdict::none("speed above the speed of sound");
    }
    let r2 = model.r2();
    let step = opts.step * r2;
    let neg = scan_side(model, c, -1.0, r2, step);
    let pos = scan_side(model, c, 1.0, opts.upper * r2, step);
    let (xi, further) = match (neg, pos) {
        (None, None) => return ExistenceVerdict::none("no sign change of V_c"),
        (Some(a), None) => (a, false),
        (None, Some(b)) => (b, false),
        (Some(a), Some(b)) => (if a.abs() <= b.abs() { a } else { b }, true),
    };
    let is_kink = c == 0.0 && (xi + r2).abs() <= 1e-12 * r2;
    if is_kink {
        return ExistenceVerdict { status: Status::Kink, xi_c: Some(-r2), further_roots: further, diagnostic: None };
    }
    let vp = v_c_prime_unchecked(model, c, xi);
    let scale = (1..=16)
        .map(|k| v_c_prime_unchecked(model, c, xi * k as f64 / 16.0).abs())
        .fold(1.0f64, f64::max);
    let is_sonic = sonic(model, c);
    let simple_needed = !(is_sonic && model.m_index.is_some_and(|m| m >= 1));
    if vp.abs() <= 1e-10 * scale && simple_needed {
        return ExistenceVerdict {
            status: Status::NoWave,
            xi_c: None,
            further_roots: further,
            diagnostic: Some(format!("double root of V_c at xi = {xi}")),
        };
    }
    let status = if is_sonic {
        Status::Sonic
    } else if xi > 0.0 {
        Status::BubbleAbove
    } else {
        Status::DarkWithXi
    };
    ExistenceVerdict { status, xi_c: Some(xi), further_roots: further, diagnostic: None }
}

/// Follow the branch through `(c, xi)` to speed `c_new` by Newton on `w`.
/// Returns `None` when the continuation leaves the branch.
pub fn track_xi_c(model: &NonlinearityModel, c: f64, xi: f64, c_new: f64) -> Option<f64> {
    if c_new > model.c_s * (1.0 + 1e-12) || c_new < 0.0 {
        return None;
    }
    let d = w_c_prime(model, c, xi);
    if d == 0.0 {
        return None;
    }
    let mut x = xi - (c_new * c_new - c * c) / d;
    for _ in 0..50 {
        if x <= -model.r2() || x.signum() != xi.signum() {
            return None;
        }
        let w = w_c(model, c_new, x);
        let dw = w_c_prime(model, c_new, x);
        if dw == 0.0 {
            return None;
        }
        let dx = w / dw;
        x -= dx;
        if dx.abs() < 1e-15 * model.r2() {
            break;
        }
    }
    if !(x > -model.r2()) || x.signum() != xi.signum() || w_c(model, c_new, x).abs() > 1e-10 {
        return None;
    }
    // W < 0 strictly inside, sampled
    let ok = (1..200).all(|k| w_c(model, c_new, x * k as f64 / 200.0) < 0.0);
    ok.then_some(x)
}

/// `|ξ_c − (−r0² + c²r0⁴/(4F(0)))|`.
pub fn xi_c_expansion_check(model: &NonlinearityModel, c: f64) -> Result<f64> {
    let v0 = find_xi_c(model, 0.0);
    if v0.status != Status::Kink {
        return Err(Error::NoKink(format!("stationary wave is {:?}", v0.status)));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let r2 = model.r2();
    let f0 = model.big_f(0.0);
    let v = find_xi_c(model, c);
    let xi = v.xi_c.ok_or_else(|| Error::NoWave(format!("c = {c}")))?;
    Ok((xi - (-r2 + c * c * r2 * r2 / (4.0 * f0))).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_model, ModelSpec};
    use proptest::prelude::*;

    fn gp() -> NonlinearityModel {
        make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap()
    }

    #[test]
    fn gp_potential_closed_form() {
        let m = gp();
        for &c in &[0.0, 0.5, 1.0, 1.4] {
            for &xi in &[-1.0, -0.5, -0.1, 0.0, 0.3, 2.0] {
                let e = xi * xi * (c * c - 2.0 - 2.0 * xi);
                assert!((v_c(&m, c, xi).unwrap() - e).abs() < 1e-14);
            }
        }
        assert_eq!(v_c(&m, 1.0, -0.5).unwrap(), 0.0);
        assert!(v_c(&m, 1.0, -1.5).is_err());
    }

    #[test]
    fn gp_turning_values() {
        let m = gp();
        let v = find_xi_c(&m, 1.0);
        assert_eq!(v.status, Status::DarkWithXi);
        assert!((v.xi_c.unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(find_xi_c(&m, 1.5).status, Status::NoWave);
        let k = find_xi_c(&m, 0.0);
        assert_eq!(k.status, Status::Kink);
        assert_eq!(k.xi_c, Some(-1.0));
        for &c in &[0.1, 0.7, 1.3] {
            let xi = find_xi_c(&m, c).xi_c.unwrap();
            assert!((xi - (c * c / 2.0 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quintic_sonic_turning_value() {
        let m = make_model(&ModelSpec::polynomial(1.0, &[-2.0, 3.0, -4.0, 5.0, -12.0])).unwrap();
        assert!(v_c(&m, 2.0, -0.5).unwrap().abs() < 1e-14);
        let v = find_xi_c(&m, m.c_s);
        assert_eq!(v.status, Status::Sonic);
        assert!((v.xi_c.unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn cubic_quintic_stationary_bubble() {
        let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, -3.0])).unwrap();
        let v = find_xi_c(&m, 0.0);
        assert_eq!(v.status, Status::DarkWithXi);
        assert!((v.xi_c.unwrap() + 0.5).abs() < 1e-12);
        let c: f64 = 0.7;
        let e = (-3.0 + (1.0 + 4.0 * c * c).sqrt()) / 4.0;
        assert!((find_xi_c(&m, c).xi_c.unwrap() - e).abs() < 1e-12);
    }

    #[test]
    fn bubble_above_and_further_roots() {
        let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 1.5, -1.5])).unwrap();
        let v = find_xi_c(&m, 1.413);
        assert!(v.further_roots);
        assert_eq!(v.status, Status::DarkWithXi);
        // W = c² − 2 + ξ²/2 − 3ξ³/2 has a positive root only near the top
        assert!(w_c(&m, 1.413, 0.1) > -1e-3);
    }

    #[test]
    fn expansion_residual() {
        assert!(xi_c_expansion_check(&gp(), 0.1).unwrap() < 1e-14);
        assert_eq!(xi_c_expansion_check(&gp(), 0.0).unwrap(), 0.0);
        let k = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 0.0, -1.0])).unwrap();
        let r: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&c| xi_c_expansion_check(&k, c).unwrap() / c.powi(4)).collect();
        assert!(r.iter().all(|&x| x < 1.0), "{r:?}");
        assert!((r[0] / r[2] - 1.0).abs() < 0.1, "{r:?}");
        let cq = make_model(&ModelSpec::polynomial(1.0, &[-1.0, -3.0])).unwrap();
        assert!(matches!(xi_c_expansion_check(&cq, 0.1), Err(Error::NoKink(_))));
    }

    #[test]
    fn tracking_follows_branch() {
        let m = gp();
        let x = track_xi_c(&m, 1.0, -0.5, 1.01).unwrap();
        assert!((x - (1.01f64 * 1.01 / 2.0 - 1.0)).abs() < 1e-13);
        assert!(track_xi_c(&m, 1.41, -0.005, 1.5).is_none());
    }

    #[test]
    fn lambda_sign_consistency() {
        for coeffs in [vec![-1.0], vec![-2.0, 3.0, -4.0, 5.0, -12.0], vec![-1.0, -3.0]] {
            let m = make_model(&ModelSpec::polynomial(1.0, &coeffs)).unwrap();
            let v = find_xi_c(&m, m.c_s);
            if let (Some(xi), Some((k, l))) = (v.xi_c, m.sonic_index()) {
                let s = 1e-3 * xi.signum();
                assert!(l * s.powi(k as i32 + 3) < 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn sonic_shift_identity(c in 0.0f64..1.4, xi in -1.0f64..3.0) {
            let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 1.5, -1.5])).unwrap();
            let lhs = v_c_unchecked(&m, c, xi);
            let rhs = v_c_unchecked(&m, m.c_s, xi) - (m.c_s * m.c_s - c * c) * xi * xi;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn origin_is_double_root(c in 0.0f64..2.0) {
            let m = make_model(&ModelSpec::polynomial(1.0, &[-2.0, 3.0, -4.0, 5.0, -6.0])).unwrap();
            prop_assert_eq!(v_c_unchecked(&m, c, 0.0), 0.0);
            prop_assert_eq!(v_c_prime_unchecked(&m, c, 0.0), 0.0);
        }

        #[test]
        fn potential_monotone_in_speed(c1 in 0.0f64..1.3, dc in 0.01f64..0.1, xi in -1.0f64..1.0) {
            prop_assume!(xi.abs() > 1e-6);
            let m = make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap();
            prop_assert!(v_c_unchecked(&m, c1, xi) < v_c_unchecked(&m, c1 + dc, xi));
        }

        #[test]
        fn verdict_invariants(c in 0.01f64..1.41) {
            let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 1.5, -1.5])).unwrap();
            let v = find_xi_c(&m, c);
            if let Some(xi) = v.xi_c {
                prop_assert!(v_c_unchecked(&m, c, xi).abs() < 1e-12);
                prop_assert!(v_c_prime_unchecked(&m, c, xi).abs() > 1e-10);
                for k in 1..100 {
                    prop_assert!(v_c_unchecked(&m, c, xi * k as f64 / 100.0) < 0.0);
                }
            }
        }
    }
}
