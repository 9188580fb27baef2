//! Energy, momentum, branch diagrams and the stability verdicts built on
//! the sign of `dP/dc`.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use crate::potential::{find_xi_c, q_prime, track_xi_c, w_c, w_c_prime, Status};
use crate::profile::{TailKind, WaveProfile};
use crate::quad;

const NEAR: f64 = 0.05;

/// `∫_0^{|ξ|} k(η) / √(−W_c(η)) d|η|` with `|η| = |ξ|(1 − τ²)`.
fn xi_integral<K: Fn(f64, f64) -> f64>(model: &NonlinearityModel, c: f64, xi: f64, kernel: K) -> Result<f64> {
    let r2 = model.r2();
    let ax = xi.abs();
    let wp = w_c_prime(model, c, xi);
    if !(wp * xi > 0.0) {
        return Err(Error::Quadrature(format!("turning point at xi = {xi} is not simple")));
    }
    let limit = 2.0 * ax / (wp * xi).sqrt();
    let rc = r2 + xi;
    // q = ρ g, so −W(η) = 4(q(η) − q(ξ)); integrating q' avoids cancellation
    let dq = |s: f64| q_prime(model, s);
    let integrand = |t: f64| {
        let d = ax * t * t;
        let eta = xi - xi.signum() * d;
        let rho = if xi < 0.0 { rc + d } else { r2 + eta };
        let jac = if t == 0.0 {
            limit
        } else {
            // mean of q' over [ξ, η] times d: robust to the rounding of η
            let mw = if d < NEAR * ax {
                if eta == xi {
                    return kernel(eta, rho) * limit;
                }
                4.0 * d * quad::gk(dq, xi, eta) / (eta - xi).abs()
            } else {
                -w_c(model, c, eta)
            };
            if mw <= 0.0 {
                return 0.0;
            }
            2.0 * ax * t / mw.sqrt()
        };
        kernel(eta, rho) * jac
    };
    // The ρ-weighted kernels peak within τ ~ √(ρ_c/|ξ|) of the turning point.
    let mut cuts = vec![0.0];
    if xi < 0.0 && rc < 0.1 * r2 {
        let s = (rc / ax).sqrt();
        let mut b = s;
        while b < 0.5 {
            cuts.push(b);
            b *= 4.0;
        }
    }
    cuts.push(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let r = quad::integrate(integrand, w[0], w[1], 1e-15, 1e-13);
        if !r.value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integral on [{}, {}]", w[0], w[1])));
        }
        total += r.value;
    }
    Ok(total)
}

fn finite_energy_check(model: &NonlinearityModel, c: f64) -> Result<()> {
    if c >= model.c_s {
        if let Some(m) = model.m_index {
            if m >= 3 {
                return Err(Error::InfiniteEnergy(m));
            }
        }
    }
    Ok(())
}

/// `E` of the wave on the branch through `(c, ξ)`.
pub fn energy_at(model: &NonlinearityModel, c: f64, xi: f64) -> Result<f64> {
    finite_energy_check(model, c)?;
    let v = xi_integral(model, c, xi, |eta, _| eta.abs() * model.g(eta))?;
    Ok(4.0 * v)
}

/// `P` of the wave on the branch through `(c, ξ)`. Zero at `c = 0`.
pub fn momentum_at(model: &NonlinearityModel, c: f64, xi: f64) -> Result<f64> {
    finite_energy_check(model, c)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let v = xi_integral(model, c, xi, |eta, rho| eta.abs() / rho)?;
    Ok(c * v)
}

fn turning_value(model: &NonlinearityModel, c: f64) -> Result<(f64, Status)> {
    let v = find_xi_c(model, c);
    match v.xi_c {
        Some(xi) => Ok((xi, v.status)),
        None => Err(Error::NoWave(format!("c = {c}: {}", v.diagnostic.unwrap_or_default()))),
    }
}

/// Energy from the turning-value quadrature.
pub fn energy_xi(model: &NonlinearityModel, c: f64) -> Result<f64> {
    let (xi, status) = turning_value(model, c)?;
    if status == Status::Kink {
        return kink_energy(model);
    }
    energy_at(model, c, xi)
}

/// Momentum from the turning-value quadrature. At `c = 0` the kink has no
/// lifting and its momentum is the limit `r0²π`.
pub fn momentum_xi(model: &NonlinearityModel, c: f64) -> Result<f64> {
    let (xi, status) = turning_value(model, c)?;
    if status == Status::Kink {
        return Ok(model.r2() * PI);
    }
    momentum_at(model, c, xi)
}

fn tail_correction(p: &WaveProfile, dens: impl Fn(usize) -> f64) -> Result<f64> {
    let n = p.len();
    let ends = dens(0) + dens(n - 1);
    let l = p.half_length;
    match p.tail.kind {
        TailKind::None => Ok(0.0),
        // densities are quadratic in η
        TailKind::Exponential => Ok(ends / (2.0 * p.tail.rate_or_exponent)),
        TailKind::Algebraic => {
            let q = -2.0 * p.tail.rate_or_exponent;
            if q <= 1.0 {
                return Err(Error::InfiniteEnergy(0));
            }
            Ok(ends * l / (q - 1.0))
        }
    }
}

fn check_finite(p: &WaveProfile) -> Result<()> {
    if !p.finite_energy {
        return Err(Error::InfiniteEnergy(0));
    }
    Ok(())
}

/// `∫|U'|² + F(|U|²)` on the grid plus the tail beyond `±L`.
pub fn energy(model: &NonlinearityModel, p: &WaveProfile) -> Result<f64> {
    check_finite(p)?;
    let r2 = model.r2();
    let dens = |i: usize| {
        let rho = p.rho(i);
        let fr = model.big_f(rho);
        if rho < 1e-6 * r2 {
            // |U'|² = F on travelling waves
            2.0 * fr
        } else {
            p.deta[i] * p.deta[i] / (4.0 * rho) + rho * p.u[i] * p.u[i] + fr
        }
    };
    let v: Vec<f64> = (0..p.len()).map(dens).collect();
    Ok(crate::grid::trapezoid(&v, p.h) + tail_correction(p, dens)?)
}

/// `∫(|U|² − r0²)∂_x φ` on the grid plus tails; `r0²π` for the kink.
pub fn momentum_grid(model: &NonlinearityModel, p: &WaveProfile) -> Result<f64> {
    check_finite(p)?;
    if p.kink {
        return Ok(model.r2() * PI);
    }
    let dens = |i: usize| p.eta[i] * p.u[i];
    let v: Vec<f64> = (0..p.len()).map(dens).collect();
    Ok(crate::grid::trapezoid(&v, p.h) + tail_correction(p, dens)?)
}

fn require_kink(model: &NonlinearityModel) -> Result<f64> {
    let f0 = model.big_f(0.0);
    if !(f0 > 0.0) || !model.has_kink() {
        return Err(Error::NoKink(format!("F(0) = {f0}")));
    }
    Ok(f0)
}

/// `2∫_0^{r0²} √(F(ϱ)/ϱ) dϱ`, computed as `4∫_0^{r0} √F(s²) ds`.
pub fn kink_energy(model: &NonlinearityModel) -> Result<f64> {
    require_kink(model)?;
    let r = quad::integrate(|s| model.big_f(s * s).max(0.0).sqrt(), 0.0, model.r0, 1e-14, 1e-13);
    Ok(4.0 * r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinkDerivative {
    pub dpdc0: f64,
    pub vk0: f64,
}

/// `dP/dc` at `c = 0` along the kink branch.
pub fn kink_dpdc(model: &NonlinearityModel) -> Result<KinkDerivative> {
    let f0 = require_kink(model)?;
    let r0 = model.r0;
    let r2 = model.r2();
    let sf0 = f0.sqrt();
    // with ϱ = s²; F(0) − F(s²) = ∫_0^{s²} f, no cancellation near s = 0
    let integrand = |s: f64| {
        if s == 0.0 {
            return r2 * r2 * model.f(0.0) / (2.0 * f0 * sf0);
        }
        let d = quad::integrate(|q| model.f(q), 0.0, s * s, 1e-300, 1e-14).value;
        let fs = f0 - d;
        let sfs = fs.max(0.0).sqrt();
        let diff = d / (s * s * sfs * sf0 * (sfs + sf0));
        (s * s - r2).powi(2) * diff
    };
    let i = quad::integrate(integrand, 0.0, r0, 1e-14, 1e-12).value;
    let dpdc0 = -8.0 * r0 * r2 / (3.0 * sf0) + i;
    Ok(KinkDerivative { dpdc0, vk0: dpdc0 / (2.0 * 2f64.sqrt()) })
}

/// `|∫_0^{ξ_0} ξ²/(r0²+ξ) dξ/√(−𝒱_0)|` for a stationary bubble.
pub fn bubble_dpdc0(model: &NonlinearityModel) -> Result<f64> {
    let v = find_xi_c(model, 0.0);
    match (v.status, v.xi_c) {
        (Status::Kink, _) => Err(Error::Domain("stationary wave is a kink; use kink_dpdc".into())),
        (_, Some(xi)) if xi != 0.0 => xi_integral(model, 0.0, xi, |eta, rho| eta.abs() / rho),
        _ => Err(Error::NoWave("no stationary bubble".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    CuspUnstable,
    Undetermined,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::CuspUnstable => "cusp_unstable",
            Verdict::Undetermined => "undetermined",
        }
    }
}

/// Classify from `dP/dc` and `d²P/dc²`.
pub fn classify(model: &NonlinearityModel, p: f64, dpdc: f64, d2pdc2: f64) -> Verdict {
    let tol = 1e-4 * (p.abs() / model.c_s).max(1.0);
    let tol2 = 1e-2;
    if !dpdc.is_finite() {
        Verdict::Undetermined
    } else if dpdc < -tol {
        Verdict::Stable
    } else if dpdc > tol {
        Verdict::Unstable
    } else if d2pdc2.abs() > tol2 {
        Verdict::CuspUnstable
    } else {
        Verdict::Undetermined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub c: f64,
    pub xi_c: f64,
    pub e: f64,
    pub p: f64,
    pub dpdc: f64,
    pub d2pdc2: f64,
    pub dedc: f64,
    /// `|dE/dc − c·dP/dc| / max(1, |dE/dc|)`.
    pub hamilton_residual: f64,
    pub one_sided: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinkEndpoint {
    pub p_limit: f64,
    pub dpdc_at_0: f64,
    pub e_kink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDiagram {
    pub points: Vec<BranchPoint>,
    /// Speeds with no travelling wave.
    pub gaps: Vec<f64>,
    pub kink: Option<KinkEndpoint>,
    /// Interpolated speeds where `dP/dc` changes sign.
    pub cusps: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Derivs {
    d1: f64,
    d2: f64,
    one_sided: bool,
}

/// First and second derivatives of `q` at `c` by Richardson-extrapolated
/// differences on `[lo, hi]`.
fn derivs(q: &dyn Fn(f64) -> Option<f64>, c: f64, h: f64, lo: f64, hi: f64) -> Option<Derivs> {
    let q0 = q(c)?;
    if c - h >= lo && c + h <= hi {
        let (m2, m1, p1, p2) = (q(c - h)?, q(c - 0.5 * h)?, q(c + 0.5 * h)?, q(c + h)?);
        let d_h = (p2 - m2) / (2.0 * h);
        let d_h2 = (p1 - m1) / h;
        let s_h = (p2 - 2.0 * q0 + m2) / (h * h);
        let s_h2 = (p1 - 2.0 * q0 + m1) / (0.25 * h * h);
        return Some(Derivs { d1: (4.0 * d_h2 - d_h) / 3.0, d2: (4.0 * s_h2 - s_h) / 3.0, one_sided: false });
    }
    let dir = if c + 3.0 * h <= hi { 1.0 } else if c - 3.0 * h >= lo { -1.0 } else { return None };
    let one = |k: f64| -> Option<(f64, f64)> {
        let (a1, a2, a3) = (q(c + dir * k)?, q(c + 2.0 * dir * k)?, q(c + 3.0 * dir * k)?);
        let d = dir * (-3.0 * q0 + 4.0 * a1 - a2) / (2.0 * k);
        let s = (2.0 * q0 - 5.0 * a1 + 4.0 * a2 - a3) / (k * k);
        Some((d, s))
    };
    let (d_h, s_h) = one(h)?;
    let (d_h2, s_h2) = one(0.5 * h)?;
    Some(Derivs { d1: (4.0 * d_h2 - d_h) / 3.0, d2: (4.0 * s_h2 - s_h) / 3.0, one_sided: true })
}

fn branch_step(model: &NonlinearityModel, c: f64) -> f64 {
    (0.01 * (model.c_s - c)).max(1e-3)
}

/// One point of the branch through `(c, ξ)`.
pub fn branch_point(model: &NonlinearityModel, c: f64, xi: f64) -> Result<BranchPoint> {
    let e = energy_at(model, c, xi)?;
    let p = momentum_at(model, c, xi)?;
    let track = |cn: f64| if cn == c { Some(xi) } else { track_xi_c(model, c, xi, cn) };
    let pq = |cn: f64| track(cn).and_then(|x| momentum_at(model, cn, x).ok());
    let eq = |cn: f64| track(cn).and_then(|x| energy_at(model, cn, x).ok());
    let h = branch_step(model, c);
    let hi = if model.m_index.is_some_and(|m| m >= 3) { model.c_s * (1.0 - 1e-9) } else { model.c_s };
    let dp = derivs(&pq, c, h, 0.0, hi);
    let de = derivs(&eq, c, h, 0.0, hi);
    let (dpdc, d2pdc2, one_sided) = dp.map_or((f64::NAN, f64::NAN, true), |d| (d.d1, d.d2, d.one_sided));
    let dedc = de.map_or(f64::NAN, |d| d.d1);
    let hamilton_residual = (dedc - c * dpdc).abs() / dedc.abs().max(1.0);
    Ok(BranchPoint {
        c,
        xi_c: xi,
        e,
        p,
        dpdc,
        d2pdc2,
        dedc,
        hamilton_residual,
        one_sided,
        verdict: classify(model, p, dpdc, d2pdc2),
    })
}

fn stationary_point(model: &NonlinearityModel) -> Result<BranchPoint> {
    let (xi, status) = turning_value(model, 0.0)?;
    if status == Status::Kink {
        let e = kink_energy(model)?;
        let k = kink_dpdc(model)?;
        let verdict = if k.dpdc0 < 0.0 { Verdict::Stable } else { Verdict::Unstable };
        return Ok(BranchPoint {
            c: 0.0,
            xi_c: xi,
            e,
            p: model.r2() * PI,
            dpdc: k.dpdc0,
            d2pdc2: f64::NAN,
            dedc: 0.0,
            hamilton_residual: 0.0,
            one_sided: true,
            verdict,
        });
    }
    let e = energy_at(model, 0.0, xi)?;
    let d = xi_integral(model, 0.0, xi, |eta, rho| eta.abs() / rho)?;
    Ok(BranchPoint {
        c: 0.0,
        xi_c: xi,
        e,
        p: 0.0,
        dpdc: d,
        d2pdc2: f64::NAN,
        dedc: 0.0,
        hamilton_residual: 0.0,
        one_sided: true,
        verdict: Verdict::Unstable,
    })
}

/// `P` on the kink branch, continued from `ξ = −r0²` at `c = 0`.
pub fn kink_branch_momentum(model: &NonlinearityModel, c: f64) -> Result<f64> {
    require_kink(model)?;
    let xi = track_xi_c(model, 0.0, -model.r2(), c)
        .ok_or_else(|| Error::NoWave(format!("kink branch does not reach c = {c}")))?;
    momentum_at(model, c, xi)
}

/// Value at 0 of the quadratic through three points.
fn extrapolate0(pts: &[(f64, f64); 3]) -> f64 {
    let mut s = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                l *= xj / (xj - xi);
            }
        }
        s += l * yi;
    }
    s
}

/// `P(c → 0)` and `dP/dc(c → 0)` on the kink branch from `c ∈ {0.04, 0.02, 0.01}·c_s/√2`.
pub fn kink_branch_limits(model: &NonlinearityModel) -> Result<(f64, f64)> {
    let s = model.c_s / SQRT_2;
    let cs = [0.04 * s, 0.02 * s, 0.01 * s];
    let mut pv = [(0.0, 0.0); 3];
    let mut dv = [(0.0, 0.0); 3];
    for (k, &c) in cs.iter().enumerate() {
        let q = |x: f64| kink_branch_momentum(model, x).ok();
        let d = derivs(&q, c, c / 4.0, 0.0, model.c_s).ok_or_else(|| Error::NoWave(format!("c = {c}")))?;
        pv[k] = (c, q(c).unwrap());
        dv[k] = (c, d.d1);
    }
    Ok((extrapolate0(&pv), extrapolate0(&dv)))
}

/// Sample the branch at `n` equally spaced speeds in `[c_min, c_max]`.
pub fn diagram(model: &NonlinearityModel, c_min: f64, c_max: f64, n: usize) -> Result<BranchDiagram> {
    if !(0.0 <= c_min && c_min < c_max && c_max <= model.c_s * (1.0 + 1e-12)) || n < 2 {
        return Err(Error::Domain(format!("need 0 <= c_min < c_max <= c_s and n >= 2, got [{c_min}, {c_max}], n = {n}")));
    }
    let cs: Vec<f64> = (0..n).map(|i| c_min + (c_max - c_min) * i as f64 / (n - 1) as f64).collect();
    let results: Vec<Option<BranchPoint>> = cs
        .par_iter()
        .map(|&c| {
            if c == 0.0 {
                return stationary_point(model).ok();
            }
            let (xi, _) = turning_value(model, c).ok()?;
            branch_point(model, c, xi).ok()
        })
        .collect();
    let mut points = vec![];
    let mut gaps = vec![];
    for (c, r) in cs.iter().zip(results) {
        match r {
            Some(p) => points.push(p),
            None => gaps.push(*c),
        }
    }
    let mut cusps = vec![];
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.c > 0.0 && a.dpdc.is_finite() && b.dpdc.is_finite() && a.dpdc.signum() != b.dpdc.signum() {
            cusps.push(a.c + (b.c - a.c) * a.dpdc / (a.dpdc - b.dpdc));
        }
    }
    let kink = if require_kink(model).is_ok() {
        let (p_limit, _) = kink_branch_limits(model)?;
        Some(KinkEndpoint { p_limit, dpdc_at_0: kink_dpdc(model)?.dpdc0, e_kink: kink_energy(model)? })
    } else {
        None
    };
    Ok(BranchDiagram { points, gaps, kink, cusps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{builtin, kappa_family, make_model, ModelSpec};
    use crate::profile::{solve_profile, GridSpec};
    use proptest::prelude::*;

    fn gp() -> NonlinearityModel {
        make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap()
    }

    fn gp_p(c: f64) -> f64 {
        let s = (2.0 - c * c).sqrt();
        2.0 * (s / c).atan() - c * s
    }

    fn gp_e(c: f64) -> f64 {
        2.0 * (2.0 - c * c).powf(1.5) / 3.0
    }

    #[test]
    fn gp_closed_forms() {
        let m = gp();
        assert!((energy_xi(&m, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!((momentum_xi(&m, 1.0).unwrap() - (PI / 2.0 - 1.0)).abs() < 1e-10);
        for c in [0.05, 0.5, 1.3] {
            assert!((momentum_xi(&m, c).unwrap() - gp_p(c)).abs() < 1e-10, "{c}");
            assert!((energy_xi(&m, c).unwrap() - gp_e(c)).abs() < 1e-10, "{c}");
        }
        assert_eq!(momentum_xi(&m, 0.0).unwrap(), PI);
        assert!(momentum_xi(&m, 2f64.sqrt()).is_err());
    }

    #[test]
    fn grid_integrals_match() {
        let m = gp();
        let p = solve_profile(&m, 0.5, GridSpec::step(0.05)).unwrap();
        assert!((momentum_grid(&m, &p).unwrap() - gp_p(0.5)).abs() < 1e-8);
        assert!((energy(&m, &p).unwrap() - gp_e(0.5)).abs() < 1e-8);
        let k = solve_profile(&m, 0.0, GridSpec::step(0.05)).unwrap();
        let ek = 4.0 * 2f64.sqrt() / 3.0;
        assert!((energy(&m, &k).unwrap() - ek).abs() < 1e-6);
        assert!((kink_energy(&m).unwrap() - ek).abs() < 1e-12);
        let z = WaveProfile::constant(&m, 0.3, GridSpec::step(0.1).with_half_length(5.0)).unwrap();
        assert_eq!(energy(&m, &z).unwrap(), 0.0);
        assert_eq!(momentum_grid(&m, &z).unwrap(), 0.0);
    }

    #[test]
    fn grid_halving_converges() {
        let m = make_model(&builtin("cqs1").unwrap()).unwrap();
        let a = solve_profile(&m, 0.7, GridSpec::step(0.1)).unwrap();
        let b = solve_profile(&m, 0.7, GridSpec::step(0.05)).unwrap();
        let (ea, eb) = (energy(&m, &a).unwrap(), energy(&m, &b).unwrap());
        let (pa, pb) = (momentum_grid(&m, &a).unwrap(), momentum_grid(&m, &b).unwrap());
        assert!((ea - eb).abs() <= 1e-7 * eb.abs());
        assert!((pa - pb).abs() <= 1e-7 * pb.abs());
        assert!((pb - momentum_xi(&m, 0.7).unwrap()).abs() <= 1e-7 * pb.abs().max(1.0));
    }

    #[test]
    fn gp_kink_derivative() {
        let m = gp();
        let k = kink_dpdc(&m).unwrap();
        assert!((k.dpdc0 + 2.0 * 2f64.sqrt()).abs() < 1e-10, "{}", k.dpdc0);
        assert!((k.vk0 + 1.0).abs() < 1e-10);
        let (pl, dl) = kink_branch_limits(&m).unwrap();
        assert!((pl - PI).abs() < 1e-5, "{pl}");
        assert!((dl + 2.0 * 2f64.sqrt()).abs() < 1e-4 * 2.0 * 2f64.sqrt(), "{dl}");
    }

    #[test]
    fn kappa_family_kink() {
        let mut prev = f64::NEG_INFINITY;
        for kappa in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let m = make_model(&kappa_family(kappa)).unwrap();
            let k = kink_dpdc(&m).unwrap();
            assert!(k.dpdc0 < 0.0);
            let s = m.big_f(0.0).sqrt() * k.dpdc0;
            // increases from −2 at κ = 0 towards −1
            assert!(s > prev && s < -1.0, "{kappa} {s}");
            prev = s;
            let (pl, dl) = kink_branch_limits(&m).unwrap();
            assert!((pl - PI).abs() < 1e-3);
            assert!((dl - k.dpdc0).abs() < 1e-4 * k.dpdc0.abs(), "{kappa} {dl} {}", k.dpdc0);
        }
        let d = |k: f64| kink_energy(&make_model(&kappa_family(k)).unwrap()).unwrap() - 2f64.sqrt() * PI;
        assert!(d(13.0) < 0.0 && d(15.0) > 0.0);
    }

    #[test]
    fn bubble_derivative_matches_branch() {
        let m = make_model(&builtin("cubic_quintic").unwrap()).unwrap();
        let b = bubble_dpdc0(&m).unwrap();
        assert!(b > 0.0);
        let q = |c: f64| momentum_xi(&m, c).unwrap() / c;
        let fd = extrapolate0(&[(0.004, q(0.004)), (0.002, q(0.002)), (0.001, q(0.001))]);
        assert!((fd - b).abs() < 1e-4 * b, "{fd} {b}");
        assert!(matches!(bubble_dpdc0(&gp()), Err(Error::Domain(_))));
    }

    #[test]
    fn gp_diagram_is_stable() {
        let m = gp();
        let d = diagram(&m, 0.0, 2f64.sqrt(), 15).unwrap();
        assert!(d.gaps.len() <= 1);
        for p in &d.points {
            assert_eq!(p.verdict, Verdict::Stable, "{p:?}");
            if p.c > 0.0 && !p.one_sided {
                let exact = -2.0 * (2.0 - p.c * p.c).sqrt();
                assert!((p.dpdc - exact).abs() < 1e-6 * exact.abs().max(1.0), "{} {} {exact}", p.c, p.dpdc);
                assert!(p.hamilton_residual < 1e-3);
            }
        }
        let k = d.kink.unwrap();
        assert!((k.p_limit - PI).abs() < 1e-5);
        assert!(d.cusps.is_empty());
    }

    #[test]
    fn cusp_found_on_cqs2() {
        let m = make_model(&builtin("cqs2_36").unwrap()).unwrap();
        let d = diagram(&m, 2.3, 2.8, 26).unwrap();
        assert!(!d.cusps.is_empty());
        assert!(d.points.iter().any(|p| p.verdict == Verdict::Unstable));
        assert!(d.points.iter().all(|p| p.hamilton_residual < 1e-3));
    }

    #[test]
    fn classify_rules() {
        let m = gp();
        assert_eq!(classify(&m, 1.0, -1.0, 0.0), Verdict::Stable);
        assert_eq!(classify(&m, 1.0, 1.0, 0.0), Verdict::Unstable);
        assert_eq!(classify(&m, 1.0, 1e-6, 0.5), Verdict::CuspUnstable);
        assert_eq!(classify(&m, 1.0, 1e-6, 1e-4), Verdict::Undetermined);
        assert_eq!(classify(&m, 1.0, f64::NAN, 1.0), Verdict::Undetermined);
    }

    #[test]
    fn diagram_rejects_bad_range() {
        let m = gp();
        assert!(diagram(&m, 1.0, 0.5, 4).is_err());
        assert!(diagram(&m, 0.0, 3.0, 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hamilton_relation_on_gp(c in 0.1f64..1.3) {
            let m = gp();
            let (xi, _) = turning_value(&m, c).unwrap();
            let b = branch_point(&m, c, xi).unwrap();
            prop_assert!(b.hamilton_residual < 1e-6);
        }

        #[test]
        fn xi_and_grid_momentum_agree(c in 0.2f64..1.2) {
            let m = make_model(&builtin("cqs1").unwrap()).unwrap();
            let p = solve_profile(&m, c, GridSpec::step(0.01)).unwrap();
            let a = momentum_grid(&m, &p).unwrap();
            let b = momentum_xi(&m, c).unwrap();
            prop_assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0));
        }
    }
}
