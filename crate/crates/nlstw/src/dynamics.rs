//! Time integration of `i∂_tΨ + ∂²_xΨ + Ψf(|Ψ|²) = 0` in a frame moving at
//! speed `c`, with the diagnostics used to probe stability: energy,
//! untwisted momentum, orbital distances, mode amplitude, growth fits and
//! the functionals `𝓛` and `𝓚`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banded::{Band, BandLu};
use crate::error::{Error, Result};
use crate::grid::{trapezoid, D1, D2};
use crate::nonlinearity::NonlinearityModel;
use crate::profile::{ProfileSolver, WaveProfile};

const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_MAX: usize = 60;
const FIXED_POINT_FLOOR: f64 = 1e-10;
/// Accuracy guard: a warning is raised when `dt > DT_GUARD·h²`.
const DT_GUARD: f64 = 50.0;
const BOUNDARY_TOL: f64 = 1e-6;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Samples `Ψ_i` on a uniform grid at time `t`, in the frame moving at `c_frame`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldState {
    pub x: Vec<f64>,
    pub h: f64,
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub c_frame: f64,
}

impl FieldState {
    pub fn from_profile(p: &WaveProfile) -> Self {
        FieldState { x: p.x.clone(), h: p.h, psi: p.sample_complex(), t: 0.0, c_frame: p.c }
    }

    /// `Ψ + δ·v`.
    pub fn perturbed(&self, v: &[Complex64], delta: f64) -> Self {
        let mut s = self.clone();
        for (a, b) in s.psi.iter_mut().zip(v) {
            *a += b * delta;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn half_length(&self) -> f64 {
        0.5 * (self.x[self.len() - 1] - self.x[0])
    }
}

/// Fourth-order `∂_x` of complex samples, second order one-sided at the ends.
pub fn derivative(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (D1[0] * (v[i + 1] - v[i - 1]) + D1[1] * (v[i + 2] - v[i - 2])) / h
            } else if i + 2 < n {
                (-3.0 * v[i] + 4.0 * v[i + 1] - v[i + 2]) / (2.0 * h)
            } else {
                (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h)
            }
        })
        .collect()
}

fn l2(v: impl Iterator<Item = f64>, h: f64) -> f64 {
    let w: Vec<f64> = v.collect();
    trapezoid(&w, h).max(0.0).sqrt()
}

/// Value at `x = 0` by four-point Lagrange interpolation.
pub fn value_at_origin(x: &[f64], v: &[Complex64]) -> Complex64 {
    let k = x.partition_point(|&s| s < 0.0);
    if k < x.len() && x[k] == 0.0 {
        return v[k];
    }
    let lo = k.saturating_sub(2).min(x.len().saturating_sub(4));
    let idx = lo..lo + 4;
    let mut s = Complex64::new(0.0, 0.0);
    for i in idx.clone() {
        let mut w = 1.0;
        for j in idx.clone() {
            if j != i {
                w *= (0.0 - x[j]) / (x[i] - x[j]);
            }
        }
        s += v[i] * w;
    }
    s
}

/// `∫|∂_xψ|² + F(|ψ|²)` on the grid.
pub fn field_energy(model: &NonlinearityModel, x: &[f64], psi: &[Complex64]) -> f64 {
    let h = x[1] - x[0];
    let d = derivative(psi, h);
    let dens: Vec<f64> = psi.iter().zip(&d).map(|(p, dp)| dp.norm_sqr() + model.big_f(p.norm_sqr())).collect();
    trapezoid(&dens, h)
}

fn check_lifting(psi: &[Complex64]) -> Result<()> {
    for (i, w) in psi.windows(2).enumerate() {
        if w[0].norm() == 0.0 || (w[0].conj() * w[1]).arg().abs() > 0.5 * PI {
            return Err(Error::Vanishing(format!("field vanishes near grid index {i}")));
        }
    }
    Ok(())
}

/// `∫(|ψ|² − r0²)∂_x argψ` for a non-vanishing field.
pub fn momentum(x: &[f64], psi: &[Complex64], r0: f64) -> Result<f64> {
    check_lifting(psi)?;
    let h = x[1] - x[0];
    let d = derivative(psi, h);
    let r2 = r0 * r0;
    let dens: Vec<f64> = psi
        .iter()
        .zip(&d)
        .map(|(p, dp)| {
            let rho = p.norm_sqr();
            (rho - r2) / rho * (p.conj() * dp).im
        })
        .collect();
    Ok(trapezoid(&dens, h))
}

/// `v` reduced to `(−p, p]` modulo `2p`.
fn reduce(v: f64, p: f64) -> f64 {
    let w = v.rem_euclid(2.0 * p);
    if w > p {
        w - 2.0 * p
    } else {
        w
    }
}

fn untwisted_at(x: &[f64], psi: &[Complex64], d: &[Complex64], r: f64, r0: f64) -> f64 {
    let h = x[1] - x[0];
    let lo = x.partition_point(|&s| s < -r);
    let hi = x.partition_point(|&s| s <= r);
    let dens: Vec<f64> = (lo..hi).map(|i| (psi[i].conj() * d[i]).im).collect();
    let r2 = r0 * r0;
    reduce(trapezoid(&dens, h) - r2 * (psi[hi - 1].arg() - psi[lo].arg()), PI * r2)
}

/// `∫_{−R}^{R}⟨iψ|∂_xψ⟩ − r0²(argψ(R) − argψ(−R))` at `R = 0.9L`, in `(−πr0², πr0²]`.
/// Fails when `|ψ|` is not within `1e−4` of `r0` at the grid ends, or when
/// the value moves by more than `1e−6·2πr0²` between `R = 0.8L` and `0.9L`.
pub fn untwisted_momentum(x: &[f64], psi: &[Complex64], r0: f64) -> Result<f64> {
    let n = psi.len();
    for &k in &[0, n - 1] {
        if (psi[k].norm() - r0).abs() > 1e-4 * r0 {
            return Err(Error::Domain(format!("|psi| = {} at the grid end, expected r0 = {r0}", psi[k].norm())));
        }
    }
    let l = 0.5 * (x[n - 1] - x[0]);
    let d = derivative(psi, x[1] - x[0]);
    let p9 = untwisted_at(x, psi, &d, 0.9 * l, r0);
    let p8 = untwisted_at(x, psi, &d, 0.8 * l, r0);
    let span = 2.0 * PI * r0 * r0;
    if reduce(p9 - p8, 0.5 * span).abs() > 1e-6 * span {
        return Err(Error::Domain(format!("untwisted momentum depends on R: {p8} at 0.8L, {p9} at 0.9L")));
    }
    Ok(p9)
}

/// `E(ψ) − c*P(ψ) + (M/2)(P(ψ) − P_ref)²`.
pub fn liapounov_l(model: &NonlinearityModel, x: &[f64], psi: &[Complex64], c: f64, m: f64, p_ref: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("M = {m} must be positive")));
    }
    let p = momentum(x, psi, model.r0)?;
    Ok(field_energy(model, x, psi) - c * p + 0.5 * m * (p - p_ref).powi(2))
}

/// `E(ψ) + 2Mr0⁴ sin²((𝔓(ψ) − r0²π)/(2r0²))`.
pub fn functional_k(model: &NonlinearityModel, x: &[f64], psi: &[Complex64], m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("M = {m} must be positive")));
    }
    let r2 = model.r2();
    let pu = untwisted_momentum(x, psi, model.r0)?;
    let s = ((pu - r2 * PI) / (2.0 * r2)).sin();
    Ok(field_energy(model, x, psi) + 2.0 * m * r2 * r2 * s * s)
}

/// `‖∂ψ − ∂ψ̃‖ + ‖|ψ| − |ψ̃|‖ + |ψ(0) − ψ̃(0)|`.
pub fn d_z(x: &[f64], psi: &[Complex64], other: &[Complex64]) -> f64 {
    let h = x[1] - x[0];
    let (d, e) = (derivative(psi, h), derivative(other, h));
    l2(d.iter().zip(&e).map(|(a, b)| (a - b).norm_sqr()), h)
        + l2(psi.iter().zip(other).map(|(a, b)| (a.norm() - b.norm()).powi(2)), h)
        + (value_at_origin(x, psi) - value_at_origin(x, other)).norm()
}

/// Amplitude, its derivative and `∂_x argψ` of a non-vanishing field.
fn lift(psi: &[Complex64], h: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_lifting(psi)?;
    let d = derivative(psi, h);
    let a: Vec<f64> = psi.iter().map(|p| p.norm()).collect();
    let da = psi.iter().zip(&d).zip(&a).map(|((p, dp), a)| (p.conj() * dp).re / a).collect();
    let dphi = psi.iter().zip(&d).map(|(p, dp)| (p.conj() * dp).im / p.norm_sqr()).collect();
    Ok((a, da, dphi))
}

/// `‖A − Ã‖_{H¹} + ‖∂φ − ∂φ̃‖ + |arg(ψ(0)/ψ̃(0))|`.
pub fn d_hy(x: &[f64], psi: &[Complex64], other: &[Complex64]) -> Result<f64> {
    let h = x[1] - x[0];
    let (a, da, dp) = lift(psi, h)?;
    let (b, db, dq) = lift(other, h)?;
    let n = psi.len();
    let h1 = l2((0..n).map(|i| (a[i] - b[i]).powi(2) + (da[i] - db[i]).powi(2)), h);
    let ph = l2((0..n).map(|i| (dp[i] - dq[i]).powi(2)), h);
    Ok(h1 + ph + (value_at_origin(x, psi) / value_at_origin(x, other)).arg().abs())
}

/// Evaluates `U_c(x − y)` for a fixed travelling wave.
pub struct WaveRef<'a> {
    solver: ProfileSolver<'a>,
    pub c: f64,
}

impl<'a> WaveRef<'a> {
    pub fn new(model: &'a NonlinearityModel, c: f64, reach: f64) -> Result<Self> {
        Ok(WaveRef { solver: ProfileSolver::new(model, c, reach)?, c })
    }

    pub fn sample(&self, x: &[f64], y: f64) -> Vec<Complex64> {
        let xs: Vec<f64> = x.iter().map(|s| s - y).collect();
        self.solver.eval_many(&xs).iter().map(|p| Complex64::from_polar(1.0, p.phi) * p.a).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinOptions {
    /// Translations are scanned on `[−y_range, y_range]`.
    pub y_range: f64,
    pub y_points: usize,
    pub tol: f64,
}

impl Default for MinOptions {
    fn default() -> Self {
        MinOptions { y_range: 2.0, y_points: 21, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Minimized {
    pub value: f64,
    pub y: f64,
    pub theta: f64,
}

fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Scan on a uniform grid, then successive parabolic interpolation inside
/// the best bracket (golden-section steps when the vertex is unusable).
fn scan_parabolic<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let ys: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let fs: Vec<f64> = ys.iter().map(|&y| f(y)).collect();
    let k = (0..n).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
    if k == 0 || k == n - 1 {
        return (ys[k], fs[k]);
    }
    let (mut a, mut b, mut c) = (ys[k - 1], ys[k], ys[k + 1]);
    let (mut fa, mut fb, mut fc) = (fs[k - 1], fs[k], fs[k + 1]);
    for _ in 0..100 {
        if c - a <= tol {
            break;
        }
        let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
        let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
        let mut u = if den != 0.0 { b - 0.5 * num / den } else { f64::NAN };
        if !(u > a && u < c) || (u - b).abs() < 0.25 * tol {
            u = if b - a > c - b { b - (1.0 - GOLDEN) * (b - a) } else { b + (1.0 - GOLDEN) * (c - b) };
        }
        let fu = f(u);
        if fu < fb {
            if u < b {
                (c, fc) = (b, fb);
            } else {
                (a, fa) = (b, fb);
            }
            (b, fb) = (u, fu);
        } else if u < b {
            (a, fa) = (u, fu);
        } else {
            (c, fc) = (u, fu);
        }
    }
    let _ = (fa, fc);
    (b, fb)
}

fn rotate(v: &[Complex64], theta: f64) -> Vec<Complex64> {
    let e = Complex64::from_polar(1.0, theta);
    v.iter().map(|z| z * e).collect()
}

/// `inf_{y,θ} d(ψ, e^{iθ}U_c(· − y))` for `d = d_Z` or `d_hy`.
fn minimize<D: Fn(&[f64], &[Complex64], &[Complex64]) -> Result<f64>>(
    state: &FieldState,
    wave: &WaveRef,
    opts: &MinOptions,
    dist: D,
) -> Result<Minimized> {
    let x = &state.x;
    let p0 = value_at_origin(x, &state.psi);
    let mut failure = None;
    let mut inner = |y: f64| -> (f64, f64) {
        let u = wave.sample(x, y);
        let t0 = (p0 / value_at_origin(x, &u)).arg();
        let (t, v) = golden(
            |t| match dist(x, &state.psi, &rotate(&u, t)) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    f64::INFINITY
                }
            },
            t0 - PI,
            t0 + PI,
            1e-10,
        );
        (t, v)
    };
    let (y, _) = scan_parabolic(|y| inner(y).1, -opts.y_range, opts.y_range, opts.y_points.max(3), opts.tol);
    let (theta, value) = inner(y);
    if let Some(e) = failure {
        if !value.is_finite() {
            return Err(e);
        }
    }
    Ok(Minimized { value, y, theta: reduce(theta, PI) })
}

/// `inf_{y,θ} d_Z(ψ, e^{iθ}U_c(· − y))`.
pub fn distance_z(state: &FieldState, wave: &WaveRef, opts: &MinOptions) -> Result<Minimized> {
    minimize(state, wave, opts, |x, a, b| Ok(d_z(x, a, b)))
}

/// `inf_{y,θ} d_hy(ψ, e^{iθ}U_c(· − y))`; fails on a vanishing field.
pub fn distance_hy(state: &FieldState, wave: &WaveRef, opts: &MinOptions) -> Result<Minimized> {
    check_lifting(&state.psi)?;
    minimize(state, wave, opts, d_hy)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub t_final: f64,
    /// Negative for backward runs.
    pub dt: f64,
    pub output_every: f64,
    /// Fraction of the grid clamped at each end.
    pub clamp_fraction: f64,
    /// Evaluate the orbital distances at each output (needs a reference wave).
    pub distances: bool,
    pub min_options: MinOptions,
    /// Keep a copy of the field at each output.
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_final: 1.0,
            dt: 0.01,
            output_every: 0.5,
            clamp_fraction: 0.02,
            distances: false,
            min_options: MinOptions::default(),
            snapshots: false,
        }
    }
}

/// What the run is compared against.
#[derive(Default)]
pub struct Observers<'a, 'm> {
    pub wave: Option<&'a WaveRef<'m>>,
    /// Unit mode `w`; the amplitude is `⟨Ψ − U*, w⟩`.
    pub mode: Option<&'a [Complex64]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    /// Untwisted momentum, `None` if the field is off `r0` at the ends.
    pub momentum: Option<f64>,
    pub d_hy: Option<f64>,
    pub d_z: Option<f64>,
    pub mode_amp: Option<f64>,
    /// Largest change of Ψ next to the clamped zone.
    pub boundary_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunDiagnostics {
    pub samples: Vec<Sample>,
    pub energy_drift: f64,
    pub momentum_drift: Option<f64>,
    pub max_iterations: usize,
    pub steps: usize,
    /// Radiation stayed away from the clamp.
    pub valid: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub final_state: FieldState,
    pub diagnostics: RunDiagnostics,
    pub snapshots: Vec<FieldState>,
}

const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// `−(F(b) − F(a))/(b − a)`, the mean of `f` over `[a, b]`.
fn mean_f(model: &NonlinearityModel, a: f64, b: f64) -> f64 {
    GL4.iter().map(|&(s, w)| w * model.f(a + s * (b - a))).sum()
}

struct Stepper {
    n: usize,
    nc: usize,
    dt: f64,
    lhs: BandLu<Complex64>,
    rhs: Band<Complex64>,
}

impl Stepper {
    /// `(I − dt/2·𝔏)`, `(I + dt/2·𝔏)` with `𝔏 = c∂_x + i∂²_x`; identity rows on the clamp.
    fn new(n: usize, h: f64, c: f64, dt: f64, nc: usize) -> Self {
        let mut lin = Band::<Complex64>::zeros(n, 2, 2);
        for i in nc..n - nc {
            lin.add(i, i, Complex64::new(0.0, D2[0] / (h * h)));
            for k in 1..=2 {
                let d1 = c * D1[k - 1] / h;
                let d2 = Complex64::new(0.0, D2[k] / (h * h));
                lin.add(i, i + k, d2 + d1);
                lin.add(i, i - k, d2 - d1);
            }
        }
        let mut a = Band::<Complex64>::zeros(n, 2, 2);
        let mut b = Band::<Complex64>::zeros(n, 2, 2);
        for i in 0..n {
            for j in lin.row_range(i) {
                let v = lin.get(i, j) * (0.5 * dt);
                let id = if i == j { 1.0 } else { 0.0 };
                a.set(i, j, -v + id);
                b.set(i, j, v + id);
            }
        }
        Stepper { n, nc, dt, lhs: a.lu(), rhs: b }
    }

    /// One step of the scheme; the nonlinearity enters through the
    /// difference quotient `−(F(ρ⁺) − F(ρ))/(ρ⁺ − ρ)`, which conserves the
    /// discrete energy.
    fn step(&self, model: &NonlinearityModel, psi: &[Complex64], guess: &[Complex64]) -> Result<(Vec<Complex64>, usize)> {
        let (n, nc) = (self.n, self.nc);
        let base = self.rhs.matvec(psi);
        let rho: Vec<f64> = psi.iter().map(|p| p.norm_sqr()).collect();
        let mut next = guess.to_vec();
        let mut prev = f64::INFINITY;
        for it in 1..=FIXED_POINT_MAX {
            let mut b = base.clone();
            for i in nc..n - nc {
                let q = mean_f(model, rho[i], next[i].norm_sqr());
                b[i] += Complex64::new(0.0, 0.5 * self.dt * q) * (next[i] + psi[i]);
            }
            for i in (0..nc).chain(n - nc..n) {
                b[i] = psi[i];
            }
            let new = self.lhs.solve(&b);
            let scale = new.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = new.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            next = new;
            if diff <= FIXED_POINT_TOL * scale || (diff >= prev && diff <= FIXED_POINT_FLOOR * scale) {
                return Ok((next, it));
            }
            prev = diff;
        }
        Err(Error::Dynamics(format!("fixed-point iteration did not converge in {FIXED_POINT_MAX} steps; reduce dt")))
    }
}

/// Integrate from `initial` over `[t, t + t_final]` (backwards if `dt < 0`).
pub fn evolve(model: &NonlinearityModel, initial: &FieldState, cfg: &RunConfig, obs: &Observers) -> Result<Run> {
    let n = initial.len();
    if n < 16 {
        return Err(Error::Domain("grid too small".into()));
    }
    if !(cfg.dt != 0.0 && cfg.t_final >= 0.0 && cfg.output_every > 0.0) {
        return Err(Error::Domain("need dt != 0, t_final >= 0, output_every > 0".into()));
    }
    let h = initial.h;
    let nc = ((cfg.clamp_fraction * n as f64).ceil() as usize).max(2);
    if 2 * nc + 8 > n {
        return Err(Error::Domain("clamp zone covers the grid".into()));
    }
    let mut warnings = vec![];
    if cfg.dt.abs() > DT_GUARD * h * h {
        warnings.push(format!("dt = {} exceeds {DT_GUARD}·h² = {}; time error may dominate", cfg.dt.abs(), DT_GUARD * h * h));
    }
    let steps = (cfg.t_final / cfg.dt.abs()).round() as usize;
    let out_stride = ((cfg.output_every / cfg.dt.abs()).round() as usize).max(1);
    let stepper = Stepper::new(n, h, initial.c_frame, cfg.dt, nc);
    let reference = obs.wave.map(|w| w.sample(&initial.x, 0.0));
    let band: Vec<usize> = (nc..2 * nc).chain(n - 2 * nc..n - nc).collect();

    let observe = |s: &FieldState| -> Result<Sample> {
        let momentum = untwisted_momentum(&s.x, &s.psi, model.r0).ok();
        let (mut dh, mut dz) = (None, None);
        if cfg.distances {
            if let Some(w) = obs.wave {
                dz = Some(distance_z(s, w, &cfg.min_options)?.value);
                dh = distance_hy(s, w, &cfg.min_options).ok().map(|m| m.value);
            }
        }
        let mode_amp = match (obs.mode, &reference) {
            (Some(w), Some(u)) => {
                let v: Vec<f64> = (0..n).map(|i| ((s.psi[i] - u[i]).conj() * w[i]).re).collect();
                Some(trapezoid(&v, h))
            }
            _ => None,
        };
        let boundary_dev = band.iter().map(|&i| (s.psi[i] - initial.psi[i]).norm()).fold(0.0, f64::max);
        Ok(Sample { t: s.t, energy: field_energy(model, &s.x, &s.psi), momentum, d_hy: dh, d_z: dz, mode_amp, boundary_dev })
    };

    let mut state = initial.clone();
    let mut samples = vec![observe(&state)?];
    let mut snapshots = if cfg.snapshots { vec![state.clone()] } else { vec![] };
    let mut prev = state.psi.clone();
    let mut max_it = 0;
    for k in 1..=steps {
        // linear extrapolation as the first guess
        let guess: Vec<Complex64> = state.psi.iter().zip(&prev).map(|(a, b)| 2.0 * a - b).collect();
        let (next, it) = stepper.step(model, &state.psi, &guess)?;
        max_it = max_it.max(it);
        prev = std::mem::replace(&mut state.psi, next);
        state.t = initial.t + k as f64 * cfg.dt;
        if k % out_stride == 0 || k == steps {
            samples.push(observe(&state)?);
            if cfg.snapshots {
                snapshots.push(state.clone());
            }
        }
    }
    let e0 = samples[0].energy;
    let energy_drift =
        samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
    let span = 2.0 * PI * model.r2();
    let momentum_drift = samples[0].momentum.and_then(|p0| {
        samples.iter().try_fold(0.0f64, |m, s| s.momentum.map(|p| m.max(reduce(p - p0, 0.5 * span).abs())))
    });
    let worst = samples.iter().map(|s| s.boundary_dev).fold(0.0, f64::max);
    let valid = worst <= BOUNDARY_TOL;
    if !valid {
        warnings.push(format!("field changed by {worst:e} next to the clamp; radiation reached the boundary"));
    }
    Ok(Run {
        final_state: state,
        diagnostics: RunDiagnostics { samples, energy_drift, momentum_drift, max_iterations: max_it, steps, valid, warnings },
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub gamma: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub efoldings: f64,
    pub points: usize,
}

/// Least-squares slope of `ln|a(t)|` over `window`, stopping where `|a|`
/// first exceeds `0.1·scale`. Needs at least two e-foldings.
pub fn growth_rate(t: &[f64], a: &[f64], window: Option<(f64, f64)>, scale: f64) -> Result<GrowthFit> {
    let (t0, t1) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut ts = vec![];
    let mut ys = vec![];
    for (&ti, &ai) in t.iter().zip(a) {
        if ti < t0 || ti > t1 {
            continue;
        }
        if ai.abs() > 0.1 * scale {
            break;
        }
        if ai != 0.0 {
            ts.push(ti);
            ys.push(ai.abs().ln());
        }
    }
    let m = ts.len();
    let efoldings = if m > 0 { ys[m - 1] - ys[0] } else { 0.0 };
    if m < 3 || efoldings < 2.0 {
        return Err(Error::Fit(format!(
            "only {efoldings:.2} e-foldings over {m} samples; use a smaller delta or a longer run"
        )));
    }
    let mf = m as f64;
    let tm = ts.iter().sum::<f64>() / mf;
    let ym = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let gamma = sxy / sxx;
    let rss: f64 = ts.iter().zip(&ys).map(|(t, y)| (y - ym - gamma * (t - tm)).powi(2)).sum();
    let se = if m > 2 { (rss / (mf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(GrowthFit { gamma, half_width: 2.0 * se, t_start: ts[0], t_end: ts[m - 1], efoldings, points: m })
}

/// `‖v‖_{H¹}` on a uniform grid.
pub fn h1_norm(v: &[Complex64], h: f64) -> f64 {
    let d = derivative(v, h);
    (v.iter().zip(&d).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum::<f64>() * h).sqrt()
}

/// `sup_t ‖Ψ(t) − U* − δe^{γ₀t}w‖_{H¹} / (δ²e^{2γ₀t})` over the snapshots.
pub fn mode_tracking_constant(snapshots: &[FieldState], base: &[Complex64], w: &[Complex64], delta: f64, gamma0: f64) -> f64 {
    let mut k = 0.0f64;
    for s in snapshots.iter().filter(|s| s.t > 0.0) {
        let g = (gamma0 * s.t).exp();
        let r: Vec<Complex64> = (0..base.len()).map(|i| s.psi[i] - base[i] - w[i] * (delta * g)).collect();
        k = k.max(h1_norm(&r, s.h) / (delta * g).powi(2));
    }
    k
}

/// Smooth random perturbation supported in `|x| ≤ 0.5L` with sup norm at
/// most `amplitude`. Draw `index` of `seed` is reproducible on its own.
pub fn random_perturbation(x: &[f64], amplitude: f64, seed: u64, index: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let l = 0.5 * (x[x.len() - 1] - x[0]);
    let bumps = rng.gen_range(3..=7);
    let params: Vec<(f64, f64, Complex64)> = (0..bumps)
        .map(|_| {
            let c = rng.gen_range(-0.3 * l..0.3 * l);
            let w = rng.gen_range(0.5..3.0);
            let (r, th): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(-PI..PI));
            (c, w, Complex64::from_polar(r.sqrt(), th))
        })
        .collect();
    let size = amplitude * rng.gen_range(0.2..=1.0);
    let window = |s: f64| {
        let a = s.abs() / l;
        if a <= 0.4 {
            1.0
        } else if a >= 0.5 {
            0.0
        } else {
            (0.5 * PI * (a - 0.4) / 0.1).cos().powi(2)
        }
    };
    let v: Vec<Complex64> = x
        .iter()
        .map(|&s| params.iter().map(|&(c, w, z)| z * (-((s - c) / w).powi(2)).exp()).sum::<Complex64>() * window(s))
        .collect();
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return v;
    }
    v.iter().map(|z| z * (size / m)).collect()
}

/// The pair `(e^{iφ*}, e^{iφ*}e^{iφ_n})` with `φ* = ½(ln x)²` for `x ≥ 1`
/// and `φ_n` the trapezoid of height π on `[0, 3nπ]`, sampled with step
/// `π/m` on `[−margin, 3nπ + margin]`.
pub fn phase_pair(n: usize, m: usize, margin: f64) -> (Vec<f64>, Vec<Complex64>, Vec<Complex64>) {
    let h = PI / m as f64;
    let nf = n as f64;
    let k0 = (margin / h).ceil() as i64;
    let k1 = (3 * n * m) as i64 + k0;
    let x: Vec<f64> = (-k0..=k1).map(|k| k as f64 * h).collect();
    let star = |s: f64| if s >= 1.0 { 0.5 * s.ln().powi(2) } else { 0.0 };
    let bump = |s: f64| {
        if s <= 0.0 || s >= 3.0 * nf * PI {
            0.0
        } else if s <= nf * PI {
            s / nf
        } else if s <= 2.0 * nf * PI {
            PI
        } else {
            3.0 * PI - s / nf
        }
    };
    let a = x.iter().map(|&s| Complex64::from_polar(1.0, star(s))).collect();
    let b = x.iter().map(|&s| Complex64::from_polar(1.0, star(s) + bump(s))).collect();
    (x, a, b)
}
