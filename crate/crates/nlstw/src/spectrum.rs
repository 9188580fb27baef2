//! Linearization about a travelling wave in hydrodynamical variables
//! `(ζ, υ)`: negative-eigenvalue counts, the continuum edge, and the
//! unstable eigenvalue of `𝒥𝓛`.

use faer::Mat;
use rayon::prelude::*;
use num_complex::Complex64;
use serde::Serialize;

use crate::banded::{complexify, count_below, eigenvector, kth_eigenvalue, Band};
use crate::error::{Error, Result};
use crate::grid::D1;
use crate::nonlinearity::NonlinearityModel;
use crate::potential::v_c_prime_unchecked;
use crate::profile::{solve_profile, GridSpec, WaveProfile};

const NEG_TOL: f64 = 1e-8;
/// Sixth-order centered second derivative, offsets 0..=3.
const D2_6: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
const LOCAL_FRACTION: f64 = 0.99;
const KERNEL_OVERLAP: f64 = 0.9;
/// Relative to the spectral radius.
const KERNEL_SHIFT: f64 = 1e-6;
const LOCAL_WINDOW: f64 = 0.8;
const RESIDUAL_TOL: f64 = 1e-8;
/// Modes this parallel to `∂_x(η*, u*)` and below the noise scale are the
/// split zero eigenvalue.
const TRANSLATION_OVERLAP: f64 = 0.5;
/// Largest size handed to the dense eigensolver.
pub const DENSE_MAX: usize = 1100;
const SCAN_POINTS: usize = 240;

/// Operators on the clamped grid. Unknowns of the block operators are
/// interleaved: `ζ_i` at `2i`, `υ_i` at `2i + 1`.
#[derive(Debug, Clone)]
pub struct LinearizedOperators {
    pub c: f64,
    pub r0: f64,
    pub c_s: f64,
    pub x: Vec<f64>,
    pub h: f64,
    pub half_length: f64,
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Band<f64>,
    pub mdag: Band<f64>,
    pub l: Band<f64>,
    pub j: Band<f64>,
    pub jl: Band<f64>,
    /// `∂_x(η*, u*)`, interleaved.
    pub translation: Vec<f64>,
}

fn band_product(a: &Band<f64>, b: &Band<f64>) -> Band<f64> {
    let n = a.n;
    let mut c = Band::zeros(n, a.kl + b.kl, a.ku + b.ku);
    for i in 0..n {
        for k in a.row_range(i) {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in b.row_range(k) {
                c.add(i, j, aik * b.get(k, j));
            }
        }
    }
    c
}

/// Build the operators from `profile`, re-solving on `n` points when the
/// profile grid has a different size.
pub fn build_operators(model: &NonlinearityModel, profile: &WaveProfile, n: usize) -> Result<LinearizedOperators> {
    if profile.kink {
        return Err(Error::Spectrum("kink: the hydrodynamical form is invalid where |U| = 0".into()));
    }
    if n < 512 {
        return Err(Error::Domain(format!("need at least 512 grid points, got {n}")));
    }
    let resampled;
    let p = if profile.len() == n {
        profile
    } else {
        resampled = solve_profile(model, profile.c, GridSpec::points(n).with_half_length(profile.half_length))?;
        &resampled
    };
    Ok(assemble(model, p))
}

/// Operators around the constant wave `U ≡ r0` at speed `c`.
pub fn constant_operators(model: &NonlinearityModel, c: f64, n: usize, half_length: f64) -> Result<LinearizedOperators> {
    let p = WaveProfile::constant(model, c, GridSpec::points(n).with_half_length(half_length))?;
    Ok(assemble(model, &p))
}

fn assemble(model: &NonlinearityModel, p: &WaveProfile) -> LinearizedOperators {
    let n = p.len();
    let h = p.h;
    let c = p.c;
    let r2 = model.r2();
    let rho: Vec<f64> = (0..n).map(|i| p.rho(i)).collect();
    let s: Vec<f64> = rho.iter().map(|r| 1.0 / r.sqrt()).collect();
    // A'' from η'' = −𝒱'(η)/2
    let pot: Vec<f64> = (0..n)
        .map(|i| {
            let (e, a) = (p.eta[i], rho[i].sqrt());
            let d = p.deta[i];
            let dd = if e == 0.0 { 0.0 } else { -0.5 * v_c_prime_unchecked(model, c, e) };
            let app = dd / (2.0 * a) - d * d / (4.0 * a * a * a);
            -model.fp(rho[i]) + app / (2.0 * a * a * a)
        })
        .collect();
    let mut m = Band::zeros(n, 3, 3);
    for i in 0..n {
        for k in 0..=3usize {
            let w = -0.5 * D2_6[k] / (h * h);
            if i + k < n {
                m.set(i, i + k, w * s[i] * s[i + k]);
                m.set(i + k, i, w * s[i] * s[i + k]);
            }
        }
        m.add(i, i, pot[i]);
    }
    let mut mdag = m.clone();
    let b: Vec<f64> = p.u.iter().map(|u| 2.0 * u - c).collect();
    for i in 0..n {
        mdag.add(i, i, -b[i] * b[i] / (2.0 * rho[i]));
    }
    let mut l = Band::zeros(2 * n, 6, 6);
    for i in 0..n {
        for j in m.row_range(i) {
            l.set(2 * i, 2 * j, m.get(i, j));
        }
        l.set(2 * i, 2 * i + 1, b[i]);
        l.set(2 * i + 1, 2 * i, b[i]);
        l.set(2 * i + 1, 2 * i + 1, 2.0 * rho[i]);
    }
    // 𝒥 = −D_x [[0, 1], [1, 0]]
    let mut jm = Band::zeros(2 * n, 5, 5);
    for i in 0..n {
        for k in 1..=2usize {
            let w = -D1[k - 1] / h;
            if i + k < n {
                jm.set(2 * i, 2 * (i + k) + 1, w);
                jm.set(2 * i + 1, 2 * (i + k), w);
            }
            if i >= k {
                jm.set(2 * i, 2 * (i - k) + 1, -w);
                jm.set(2 * i + 1, 2 * (i - k), -w);
            }
        }
    }
    let jl = band_product(&jm, &l);
    let mut translation = vec![0.0; 2 * n];
    for i in 0..n {
        translation[2 * i] = p.deta[i];
        translation[2 * i + 1] = 0.5 * c * r2 * p.deta[i] / (rho[i] * rho[i]);
    }
    LinearizedOperators {
        c,
        r0: model.r0,
        c_s: model.c_s,
        x: p.x.clone(),
        h,
        half_length: p.half_length,
        eta: p.eta.clone(),
        u: p.u.clone(),
        m,
        mdag,
        l,
        j: jm,
        jl,
        translation,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl LinearizedOperators {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `‖𝓜† ∂_xη*‖ / (‖𝓜†‖_∞ ‖∂_xη*‖)`.
    pub fn mdag_kernel_residual(&self) -> f64 {
        let d: Vec<f64> = (0..self.len()).map(|i| self.translation[2 * i]).collect();
        let r = self.mdag.matvec(&d);
        let scale = crate::banded::gershgorin(&self.mdag).1.abs();
        norm(&r) / (scale * norm(&d))
    }

    /// `‖𝒥𝓛 ∂_x(η*, u*)‖ / ‖∂_x(η*, u*)‖`, restricted to `|x| ≤ 0.8L`.
    pub fn translation_residual(&self) -> f64 {
        let lim = LOCAL_WINDOW * self.half_length;
        let r = self.jl.matvec(&self.translation);
        let inside = |k: usize| self.x[k / 2].abs() <= lim;
        let rr: f64 = r.iter().enumerate().filter(|(k, _)| inside(*k)).map(|(_, v)| v * v).sum();
        rr.sqrt() / norm(&self.translation)
    }

    /// `|⟨v, ∂_x(η*, u*)⟩| / (‖v‖ ‖∂_x(η*, u*)‖)`.
    pub fn translation_overlap(&self, v: &[Complex64]) -> f64 {
        let t = &self.translation;
        let d: Complex64 = v.iter().zip(t).map(|(a, b)| a * b).sum();
        let nv = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        d.norm() / (nv * norm(t))
    }

    /// `(ζ, υ)` mass fraction inside `|x| ≤ 0.8L`.
    pub fn local_fraction(&self, v: &[Complex64]) -> f64 {
        let lim = LOCAL_WINDOW * self.half_length;
        let mut inside = 0.0;
        let mut total = 0.0;
        for (k, z) in v.iter().enumerate() {
            let x = self.x[k / (v.len() / self.len())];
            let w = z.norm_sqr();
            total += w;
            if x.abs() <= lim {
                inside += w;
            }
        }
        inside / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NegativeCounts {
    pub n_neg_l: usize,
    pub n_neg_mdag: usize,
}

/// Eigenvalues below `−1e−8`, not counting a near-zero eigenvalue whose
/// eigenvector is the discretized kernel `k`.
fn count_off_kernel(a: &Band<f64>, k: &[f64]) -> usize {
    let n = count_below(a, -NEG_TOL);
    if n == 0 {
        return 0;
    }
    let lam = kth_eigenvalue(a, n - 1, 1e-14);
    if lam.abs() > KERNEL_SHIFT * crate::banded::gershgorin(a).1.abs() {
        return n;
    }
    let v = eigenvector(a, lam);
    let d: f64 = v.iter().zip(k).map(|(a, b)| a * b).sum();
    if d.abs() / (norm(&v) * norm(k)) > KERNEL_OVERLAP {
        n - 1
    } else {
        n
    }
}

/// Eigenvalues below `−1e−8` of `𝓛` and `𝓜†`, the translation mode excluded.
pub fn count_negative(ops: &LinearizedOperators) -> NegativeCounts {
    let d: Vec<f64> = (0..ops.len()).map(|i| ops.translation[2 * i]).collect();
    NegativeCounts { n_neg_l: count_off_kernel(&ops.l, &ops.translation), n_neg_mdag: count_off_kernel(&ops.mdag, &d) }
}

/// Lowest eigenvalue of `𝓜†` whose eigenvector is not localized.
pub fn continuum_edge(ops: &LinearizedOperators) -> Result<f64> {
    for k in 0..40 {
        let lam = kth_eigenvalue(&ops.mdag, k, 1e-13);
        let v: Vec<Complex64> = eigenvector(&ops.mdag, lam).iter().map(|&a| Complex64::new(a, 0.0)).collect();
        if ops.local_fraction(&v) < LOCAL_FRACTION {
            return Ok(lam);
        }
    }
    Err(Error::Spectrum("no delocalized eigenvector among the 40 lowest".into()))
}

/// All eigenvalues of `𝒥𝓛` (dense).
/// Sign of `det(𝒥𝓛 − λ)` for real `λ`.
fn det_sign(jl: &Band<f64>, lambda: f64) -> f64 {
    let lu = jl.shifted(lambda).lu();
    if lu.singular {
        0.0
    } else {
        lu.log_det().0
    }
}

/// Real eigenvalues of `𝒥𝓛` in `(thr, 10c_s²/r0²)` located by sign changes of
/// the banded determinant on a logarithmic grid, then bisected.
pub fn real_axis_eigenvalues(ops: &LinearizedOperators) -> Vec<f64> {
    let lo = 1e-6 * ops.c_s / ops.r0;
    let hi = 10.0 * ops.c_s * ops.c_s / (ops.r0 * ops.r0);
    let grid: Vec<f64> =
        (0..SCAN_POINTS).map(|k| lo * (hi / lo).powf(k as f64 / (SCAN_POINTS - 1) as f64)).collect();
    let signs: Vec<f64> = grid.par_iter().map(|&l| det_sign(&ops.jl, l)).collect();
    let mut out = vec![];
    for k in 1..SCAN_POINTS {
        if signs[k - 1] * signs[k] < 0.0 {
            let (mut a, mut b, sa) = (grid[k - 1], grid[k], signs[k - 1]);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let sm = det_sign(&ops.jl, m);
                if sm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if sm == sa {
                    a = m;
                } else {
                    b = m;
                }
                if b - a <= 1e-13 * b {
                    break;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

/// Eigenvalue candidates: all eigenvalues for sizes up to [`DENSE_MAX`],
/// real ones from a determinant scan above.
pub fn jl_candidates(ops: &LinearizedOperators) -> Result<Vec<Complex64>> {
    if ops.jl.n <= DENSE_MAX {
        jl_eigenvalues(ops)
    } else {
        Ok(real_axis_eigenvalues(ops).into_iter().map(|l| Complex64::new(l, 0.0)).collect())
    }
}

pub fn jl_eigenvalues(ops: &LinearizedOperators) -> Result<Vec<Complex64>> {
    let n = ops.jl.n;
    let a = Mat::<f64>::from_fn(n, n, |i, j| ops.jl.get(i, j));
    let ev = a.eigenvalues().map_err(|e| Error::Spectrum(format!("eigensolver failed: {e:?}")))?;
    Ok(ev.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Inverse iteration on `𝒥𝓛 − σ` with shift updates.
fn refine(jl: &Band<Complex64>, mut sigma: Complex64) -> (Complex64, Vec<Complex64>, f64) {
    let n = jl.n;
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + ((i * 37) % 11) as f64 * 0.1, 0.0)).collect();
    let mut best = (sigma, v.clone(), f64::INFINITY);
    for it in 0..12 {
        let lu = jl.shifted(sigma).lu();
        if lu.singular {
            sigma += Complex64::new(1e-12 * (1.0 + sigma.norm()), 0.0);
            continue;
        }
        let y = lu.solve(&v);
        let vy: Complex64 = v.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let vv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        let nrm = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v = y.iter().map(|a| a / nrm).collect();
        if it >= 1 && vy.norm() > 0.0 {
            sigma += vv / vy;
        }
        let av = jl.matvec(&v);
        let r = av.iter().zip(&v).map(|(a, b)| (a - sigma * b).norm_sqr()).sum::<f64>().sqrt();
        if r < best.2 {
            best = (sigma, v.clone(), r);
        }
        if r <= 1e-3 * RESIDUAL_TOL {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct UnstableMode {
    pub gamma0: f64,
    /// Eigenvalue before discarding the imaginary part.
    pub lambda: (f64, f64),
    pub zeta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub residual: f64,
    pub rejected: usize,
}

/// The eigenvalue of `𝒥𝓛` with largest real part above `1e−6·c_s/r0`,
/// after discarding spurious modes (delocalized or large residual).
pub fn unstable_eigen(ops: &LinearizedOperators) -> Result<Option<UnstableMode>> {
    let ev = jl_candidates(ops)?;
    unstable_from(ops, &ev)
}

pub fn unstable_from(ops: &LinearizedOperators, ev: &[Complex64]) -> Result<Option<UnstableMode>> {
    let thr = 1e-6 * ops.c_s / ops.r0;
    let mut cands: Vec<Complex64> = ev.iter().copied().filter(|z| z.re > thr && z.im >= 0.0).collect();
    cands.sort_by(|a, b| b.re.total_cmp(&a.re));
    let jl = complexify(&ops.jl);
    let noise = ops.translation_residual().sqrt();
    let mut accepted: Vec<(Complex64, Vec<Complex64>, f64)> = vec![];
    let mut rejected = 0;
    for z in cands {
        let (lam, v, r) = refine(&jl, z);
        let ok = r <= RESIDUAL_TOL
            && lam.re > thr
            && ops.local_fraction(&v) >= LOCAL_FRACTION
            && (lam.re > noise || ops.translation_overlap(&v) < TRANSLATION_OVERLAP);
        if !ok {
            rejected += 1;
            continue;
        }
        if accepted.iter().any(|(a, _, _)| (a - lam).norm() <= 1e-6 * (1.0 + lam.norm())) {
            continue;
        }
        accepted.push((lam, v, r));
    }
    match accepted.len() {
        0 => Ok(None),
        1 => {
            let (lam, mut v, r) = accepted.pop().unwrap();
            if lam.im.abs() > 1e-8 * (1.0 + lam.re.abs()) {
                return Err(Error::Spectrum(format!("unstable eigenvalue {lam} is not real")));
            }
            // rotate to a real vector
            let k = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap();
            let ph = v[k].conj() / v[k].norm();
            for z in v.iter_mut() {
                *z *= ph;
            }
            let n = ops.len();
            let zeta: Vec<f64> = (0..n).map(|i| v[2 * i].re).collect();
            let upsilon: Vec<f64> = (0..n).map(|i| v[2 * i + 1].re).collect();
            Ok(Some(UnstableMode { gamma0: lam.re, lambda: (lam.re, lam.im), zeta, upsilon, residual: r, rejected }))
        }
        k => Err(Error::Spectrum(format!(
            "{k} eigenvalues in the right half-plane survive filtering: {:?}; refine the grid",
            accepted.iter().map(|a| a.0).collect::<Vec<_>>()
        ))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub c: f64,
    pub n: usize,
    pub half_length: f64,
    pub gamma0: Option<f64>,
    pub n_neg_l: usize,
    pub n_neg_mdag: usize,
    pub continuum_edge: f64,
    pub eigen_residual: Option<f64>,
    pub mdag_kernel_residual: f64,
    pub translation_residual: f64,
    /// Largest real part among the candidate eigenvalues of `𝒥𝓛`.
    pub max_real_part: f64,
    #[serde(skip)]
    pub mode: Option<UnstableMode>,
}

/// Counts, edge and unstable eigenvalue in one pass.
pub fn report(ops: &LinearizedOperators) -> Result<SpectrumReport> {
    let counts = count_negative(ops);
    let ev = jl_candidates(ops)?;
    let max_real_part = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mode = unstable_from(ops, &ev)?;
    Ok(SpectrumReport {
        c: ops.c,
        n: ops.len(),
        half_length: ops.half_length,
        gamma0: mode.as_ref().map(|m| m.gamma0),
        n_neg_l: counts.n_neg_l,
        n_neg_mdag: counts.n_neg_mdag,
        continuum_edge: continuum_edge(ops)?,
        eigen_residual: mode.as_ref().map(|m| m.residual),
        mdag_kernel_residual: ops.mdag_kernel_residual(),
        translation_residual: ops.translation_residual(),
        max_real_part,
        mode,
    })
}

/// `∫_{x_0}^{x_i} v`, fourth order: cubic through four neighbouring nodes on
/// each cell, trapezoid on the two end cells.
fn cumulative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let cell = if i >= 1 && i + 2 < n {
            h / 24.0 * (-v[i - 1] + 13.0 * v[i] + 13.0 * v[i + 1] - v[i + 2])
        } else {
            0.5 * h * (v[i] + v[i + 1])
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// `w = U*(ζ/(2ρ*) + i∫_{−L}^x υ)`, scaled so that `‖w‖_{L²} = 1` on the grid.
pub fn to_nls_mode(profile: &WaveProfile, zeta: &[f64], upsilon: &[f64]) -> Result<Vec<Complex64>> {
    let n = profile.len();
    if zeta.len() != n || upsilon.len() != n {
        return Err(Error::Domain("mode and profile grids differ".into()));
    }
    let r = upsilon_mean_ratio(upsilon, profile.h);
    if r > 1e-6 {
        return Err(Error::Spectrum(format!("mean of upsilon is {r:e} of its L1 norm, expected 0")));
    }
    nls_mode_field(profile, zeta, upsilon)
}

/// `|∫υ| / ∫|υ|` on the grid.
pub fn upsilon_mean_ratio(upsilon: &[f64], h: f64) -> f64 {
    let total = *cumulative(upsilon, h).last().unwrap_or(&0.0);
    let l1: f64 = upsilon.iter().map(|v| v.abs()).sum::<f64>() * h;
    if l1 > 0.0 { total.abs() / l1 } else { 0.0 }
}

/// Same map as [`to_nls_mode`] without the zero-mean check.
pub fn nls_mode_field(profile: &WaveProfile, zeta: &[f64], upsilon: &[f64]) -> Result<Vec<Complex64>> {
    let n = profile.len();
    if zeta.len() != n || upsilon.len() != n {
        return Err(Error::Domain("mode and profile grids differ".into()));
    }
    let u = profile.sample_complex();
    let phase = cumulative(upsilon, profile.h);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        w.push(u[i] * Complex64::new(zeta[i] / (2.0 * profile.rho(i)), phase[i]));
    }
    let nr = (w.iter().map(|z| z.norm_sqr()).sum::<f64>() * profile.h).sqrt();
    if nr > 0.0 {
        for z in w.iter_mut() {
            *z /= nr;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{builtin, make_model, ModelSpec};
    use crate::profile::solve_profile;

    fn gp() -> NonlinearityModel {
        make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap()
    }

    #[test]
    fn operators_are_symmetric_and_skew() {
        let m = gp();
        let p = solve_profile(&m, 1.0, GridSpec::points(512).with_half_length(20.0)).unwrap();
        let ops = build_operators(&m, &p, 512).unwrap();
        assert!(ops.m.asymmetry() < 1e-10);
        assert!(ops.mdag.asymmetry() < 1e-10);
        assert!(ops.l.asymmetry() < 1e-10);
        let mut skew = 0.0f64;
        for i in 0..ops.j.n {
            for j in ops.j.row_range(i) {
                skew = skew.max((ops.j.get(i, j) + ops.j.get(j, i)).abs());
            }
        }
        assert!(skew < 1e-10);
    }

    #[test]
    fn gp_counts_and_kernel() {
        let m = gp();
        let p = solve_profile(&m, 1.0, GridSpec::points(1024)).unwrap();
        let ops = build_operators(&m, &p, 1024).unwrap();
        let c = count_negative(&ops);
        assert_eq!(c.n_neg_mdag, 1);
        assert!(c.n_neg_l <= 1);
        assert!(ops.mdag_kernel_residual() < 1e-6, "{}", ops.mdag_kernel_residual());
        let edge = continuum_edge(&ops).unwrap();
        assert!((edge - 0.5).abs() < 0.015 * 0.5, "{edge}");
        assert!(ops.translation_residual() < 1e-5);
    }

    #[test]
    fn constant_operator_limit() {
        let m = gp();
        let c = 0.8;
        let ops = constant_operators(&m, c, 512, 30.0).unwrap();
        let h = ops.h;
        let shift = (m.c_s * m.c_s - c * c) / 2.0;
        for i in 2..510 {
            assert!((ops.mdag.get(i, i) - (49.0 / 36.0 / (h * h) + shift)).abs() < 1e-9 * (1.0 / (h * h)));
            assert!((ops.mdag.get(i, i + 1) + 0.75 / (h * h)).abs() < 1e-9 / (h * h));
        }
        assert_eq!(count_negative(&ops).n_neg_mdag, 0);
        assert!((kth_eigenvalue(&ops.mdag, 0, 1e-14) - shift).abs() < 1e-2);
    }

    #[test]
    fn kink_rejected() {
        let m = gp();
        let p = solve_profile(&m, 0.0, GridSpec::points(513).with_half_length(10.0)).unwrap();
        assert!(matches!(build_operators(&m, &p, 513), Err(Error::Spectrum(_))));
    }

    #[test]
    fn gp_stable_has_no_unstable_eigenvalue() {
        let m = gp();
        let p = solve_profile(&m, 1.0, GridSpec::points(512).with_half_length(20.0)).unwrap();
        let ops = build_operators(&m, &p, 512).unwrap();
        assert!(ops.translation_residual() < 1e-3, "{}", ops.translation_residual());
        let ev = jl_eigenvalues(&ops).unwrap();
        assert!(unstable_from(&ops, &ev).unwrap().is_none());
        // Hamiltonian symmetry λ → −λ
        let mut worst = 0.0f64;
        for z in ev.iter().filter(|z| z.norm() < 5.0) {
            let d = ev.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn bubble_is_unstable() {
        let m = make_model(&builtin("cubic_quintic").unwrap()).unwrap();
        let p = solve_profile(&m, 0.0, GridSpec::points(600).with_half_length(16.0)).unwrap();
        let ops = build_operators(&m, &p, 600).unwrap();
        let md = unstable_eigen(&ops).unwrap().expect("bubble must be unstable");
        assert!(md.gamma0 > 0.0 && md.residual <= 1e-8);
        assert!(count_negative(&ops).n_neg_l >= 1);
        let w = to_nls_mode(&p, &md.zeta, &md.upsilon).unwrap();
        let nr: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>() * p.h;
        assert!((nr - 1.0).abs() < 1e-12);
        // not proportional to ∂_x|U*|
        let da: Vec<f64> = (0..p.len()).map(|i| p.deta[i] / (2.0 * p.a[i])).collect();
        let wa: Vec<f64> = (0..p.len()).map(|i| (w[i].conj() * p.sample_complex()[i]).re / p.a[i]).collect();
        let dot: f64 = da.iter().zip(&wa).map(|(a, b)| a * b).sum();
        let cos = dot / (norm(&da) * norm(&wa));
        assert!(cos.abs() < 0.9, "{cos}");
    }

    #[test]
    fn zero_mode_maps_to_zero() {
        let m = gp();
        let p = solve_profile(&m, 1.0, GridSpec::points(101).with_half_length(10.0)).unwrap();
        let w = to_nls_mode(&p, &[0.0; 101], &[0.0; 101]).unwrap();
        assert!(w.iter().all(|z| z.norm() == 0.0));
    }
}
