//! Travelling-wave profiles from the first integral `(η′)² + 𝒱_c(η) = 0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use crate::potential::{self, find_xi_c, Status};
use crate::quad;

/// Where the quadrature table hands over to the analytic tail, relative to |ξ_c|.
const STITCH: f64 = 1e-8;
const TAU_PIECES: usize = 32;
const Q_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    Step(f64),
    Points(usize),
    /// `h = 0.1·min|U|` clamped to `[1e−3, 0.05]` so the density minimum is
    /// resolved; `0.05` for kinks.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-length `L`; `None` picks `30/√(c_s² − c²)`.
    pub half_length: Option<f64>,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { half_length: None, spacing: Spacing::Auto }
    }
}

impl GridSpec {
    pub fn step(h: f64) -> Self {
        GridSpec { half_length: None, spacing: Spacing::Step(h) }
    }

    pub fn points(n: usize) -> Self {
        GridSpec { half_length: None, spacing: Spacing::Points(n) }
    }

    pub fn with_half_length(mut self, l: f64) -> Self {
        self.half_length = Some(l);
        self
    }

    /// Grid nodes `−L + i·h` for the given half-length.
    pub fn nodes(&self, l: f64) -> Result<Vec<f64>> {
        if !(l > 0.0) {
            return Err(Error::Domain(format!("half-length {l} must be positive")));
        }
        let n = match self.spacing {
            Spacing::Auto => return GridSpec { spacing: Spacing::Step(0.05), ..*self }.nodes(l),
            Spacing::Step(h) => {
                if !(h > 0.0) {
                    return Err(Error::Domain("grid step must be positive".into()));
                }
                let n = (2.0 * l / h).round() as usize + 1;
                n + (n + 1) % 2
            }
            Spacing::Points(n) => n,
        };
        if n < 3 {
            return Err(Error::Domain("grid needs at least 3 points".into()));
        }
        let h = 2.0 * l / (n - 1) as f64;
        Ok((0..n).map(|i| if 2 * i + 1 == n { 0.0 } else { -l + i as f64 * h }).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Exponential,
    Algebraic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tail {
    pub kind: TailKind,
    /// Decay rate (exponential) or exponent of |x| (algebraic, negative).
    pub rate_or_exponent: f64,
    /// `M_c` in `η ~ M_c e^{−rate·x}`, or the algebraic prefactor.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveProfile {
    pub c: f64,
    pub xi_c: Option<f64>,
    pub r0: f64,
    pub x: Vec<f64>,
    pub h: f64,
    pub half_length: f64,
    pub eta: Vec<f64>,
    /// Amplitude; signed (odd) for the kink.
    pub a: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// ∂_x η from the first integral.
    pub deta: Vec<f64>,
    pub theta_c: Option<f64>,
    pub tail: Tail,
    pub kink: bool,
    pub sonic: bool,
    pub finite_energy: bool,
}

/// Values of the wave at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub eta: f64,
    pub a: f64,
    pub u: f64,
    pub phi: f64,
    pub deta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    Tau,
    Q,
}

#[derive(Debug, Clone)]
struct Segment {
    param: Param,
    p: Vec<f64>,
    x: Vec<f64>,
    phi: Vec<f64>,
}

/// Evaluates a travelling wave at arbitrary abscissae.
#[derive(Debug, Clone)]
pub struct ProfileSolver<'a> {
    model: &'a NonlinearityModel,
    pub c: f64,
    pub xi_c: f64,
    sign: f64,
    rate: f64,
    kink: bool,
    sonic: bool,
    segs: Vec<Segment>,
    /// (x, |η| or r0−A, φ) at the stitch point.
    stitch: (f64, f64, f64),
    theta: Option<f64>,
    tail: Tail,
    m: usize,
    lambda: f64,
    reach: f64,
}

impl<'a> ProfileSolver<'a> {
    /// Build the quadrature tables so that abscissae up to `reach` are covered.
    pub fn new(model: &'a NonlinearityModel, c: f64, reach: f64) -> Result<Self> {
        let v = find_xi_c(model, c);
        let xi = match v.xi_c {
            Some(x) => x,
            None => return Err(Error::NoWave(format!("c = {c}: {}", v.diagnostic.unwrap_or_default()))),
        };
        let sonic = v.status == Status::Sonic;
        let (m, lambda) = model.sonic_index().unwrap_or((0, 0.0));
        if sonic && model.sonic_index().is_none() {
            return Err(Error::InfiniteEnergy(7));
        }
        let kink = v.status == Status::Kink;
        let rate = if sonic { 0.0 } else { (model.c_s * model.c_s - c * c).max(0.0).sqrt() };
        let mut s = ProfileSolver {
            model,
            c,
            xi_c: xi,
            sign: xi.signum(),
            rate,
            kink,
            sonic,
            segs: vec![],
            stitch: (0.0, 0.0, 0.0),
            theta: None,
            tail: Tail { kind: TailKind::None, rate_or_exponent: 0.0, amplitude: 0.0 },
            m,
            lambda,
            reach,
        };
        s.build()?;
        Ok(s)
    }

    fn r0(&self) -> f64 {
        self.model.r0
    }

    fn eta_at(&self, param: Param, p: f64) -> f64 {
        if self.kink {
            let a = self.amp_at(param, p);
            return a * a - self.model.r2();
        }
        match param {
            Param::Tau => self.xi_c * (1.0 - p * p),
            Param::Q => 0.5 * self.xi_c * (-p).exp(),
        }
    }

    fn amp_at(&self, param: Param, p: f64) -> f64 {
        let r0 = self.r0();
        match param {
            Param::Tau => 0.5 * r0 * p,
            Param::Q => r0 - 0.5 * r0 * (-p).exp(),
        }
    }

    fn neg_w(&self, eta: f64) -> f64 {
        potential::neg_w_near(self.model, self.c, self.xi_c, eta)
    }

    fn dxdp(&self, param: Param, p: f64) -> f64 {
        if self.kink {
            let a = self.amp_at(param, p);
            let sf = self.model.big_f(a * a).sqrt();
            return match param {
                Param::Tau => 0.5 * self.r0() / sf,
                Param::Q => (self.r0() - a) / sf,
            };
        }
        match param {
            Param::Tau => {
                if p < 1e-7 {
                    let wp = potential::w_c_prime(self.model, self.c, self.xi_c);
                    return 2.0 / (wp * self.xi_c).sqrt();
                }
                let eta = self.eta_at(param, p);
                2.0 * self.xi_c.abs() * p / (eta.abs() * self.neg_w(eta).sqrt())
            }
            Param::Q => 1.0 / self.neg_w(self.eta_at(param, p)).sqrt(),
        }
    }

    fn u_of(&self, eta: f64) -> f64 {
        if self.kink {
            return 0.0;
        }
        0.5 * self.c * eta / (eta + self.model.r2())
    }

    fn dphidp(&self, param: Param, p: f64) -> f64 {
        self.u_of(self.eta_at(param, p)) * self.dxdp(param, p)
    }

    fn seg_integral(&self, param: Param, a: f64, b: f64, phase: bool) -> f64 {
        if phase {
            quad::integrate(|p| self.dphidp(param, p), a, b, 1e-15, 1e-14).value
        } else {
            quad::integrate(|p| self.dxdp(param, p), a, b, 1e-15, 1e-14).value
        }
    }

    fn build(&mut self) -> Result<()> {
        let tau_end = if self.kink { 1.0 } else { 0.5f64.sqrt() };
        let mut seg = Segment { param: Param::Tau, p: vec![0.0], x: vec![0.0], phi: vec![0.0] };
        for i in 1..=TAU_PIECES {
            let (a, b) = (tau_end * (i - 1) as f64 / TAU_PIECES as f64, tau_end * i as f64 / TAU_PIECES as f64);
            let dx = self.seg_integral(Param::Tau, a, b, false);
            let dphi = self.seg_integral(Param::Tau, a, b, true);
            seg.p.push(b);
            seg.x.push(seg.x.last().unwrap() + dx);
            seg.phi.push(seg.phi.last().unwrap() + dphi);
        }
        let (x0, phi0) = (*seg.x.last().unwrap(), *seg.phi.last().unwrap());
        self.segs.push(seg);
        let q_end = (0.5 / STITCH).ln();
        let mut seg = Segment { param: Param::Q, p: vec![0.0], x: vec![x0], phi: vec![phi0] };
        let mut q = 0.0;
        while q < q_end && *seg.x.last().unwrap() <= self.reach {
            let b = (q + Q_STEP).min(q_end);
            let dx = self.seg_integral(Param::Q, q, b, false);
            let dphi = self.seg_integral(Param::Q, q, b, true);
            if !dx.is_finite() {
                return Err(Error::Quadrature(format!("profile table at q = {q}")));
            }
            seg.p.push(b);
            seg.x.push(seg.x.last().unwrap() + dx);
            seg.phi.push(seg.phi.last().unwrap() + dphi);
            q = b;
        }
        let reached_stitch = q >= q_end;
        let (xs, phis) = (*seg.x.last().unwrap(), *seg.phi.last().unwrap());
        let ps = *seg.p.last().unwrap();
        self.segs.push(seg);
        let r2 = self.model.r2();
        if self.kink {
            let d = self.r0() - self.amp_at(Param::Q, ps);
            self.stitch = (xs, d, 0.0);
            let eta_st = -(2.0 * self.r0() - d) * d;
            self.tail = Tail { kind: TailKind::Exponential, rate_or_exponent: self.model.c_s, amplitude: eta_st * (self.model.c_s * xs).exp() };
            self.theta = Some(0.0);
            return Ok(());
        }
        let eta_st = self.eta_at(Param::Q, ps);
        self.stitch = (xs, eta_st.abs(), phis);
        if self.sonic {
            let mm = self.m as f64 + 1.0;
            let pref = (4.0 / (mm * mm * self.lambda.abs())).powf(1.0 / mm);
            self.tail = Tail { kind: TailKind::Algebraic, rate_or_exponent: -2.0 / mm, amplitude: self.sign * pref };
            if self.m == 0 && reached_stitch {
                // ∫_{x_s}^∞ (c/2)η/r0² for η = (a + b(x − x_s))^{−2}
                let a = eta_st.abs().powf(-0.5);
                let b = 0.5 * mm * self.lambda.abs().sqrt();
                self.theta = Some(phis + 0.5 * self.c * self.sign / r2 / (a * b));
            } else if self.m == 0 {
                self.theta = Some(self.theta_by_quadrature());
            }
        } else {
            let k = self.rate;
            self.tail = Tail { kind: TailKind::Exponential, rate_or_exponent: k, amplitude: eta_st * (k * xs).exp() };
            self.theta = Some(if reached_stitch {
                phis + 0.5 * self.c / k * ((r2 + eta_st) / r2).ln()
            } else {
                self.theta_by_quadrature()
            });
        }
        Ok(())
    }

    /// `Θ_c = (c/2)∫_0^{|ξ_c|} d|η| / ((r0² + η)√(−W))`.
    fn theta_by_quadrature(&self) -> f64 {
        let xi = self.xi_c;
        let r2 = self.model.r2();
        let g = |t: f64| {
            if t < 1e-7 {
                let wp = potential::w_c_prime(self.model, self.c, xi);
                return 2.0 * xi.abs() / ((r2 + xi) * (wp * xi).sqrt());
            }
            let eta = xi * (1.0 - t * t);
            2.0 * xi.abs() * t / ((r2 + eta) * self.neg_w(eta).sqrt())
        };
        self.sign * 0.5 * self.c * quad::integrate(g, 0.0, 1.0, 1e-14, 1e-13).value
    }

    /// Solve `X(p) = x` for `p ∈ [p0, pb]`, starting from the known point
    /// `(p0, x0, φ0)`. `fast` uses a single Kronrod panel per evaluation,
    /// which is exact to rounding when `p − p0` is a grid step.
    #[allow(clippy::too_many_arguments)]
    fn invert_from(&self, param: Param, p0: f64, x0: f64, phi0: f64, pb: f64, x: f64, fast: bool) -> (f64, f64) {
        let integ = |a: f64, b: f64, phase: bool| {
            if fast {
                if phase {
                    quad::gk(|p| self.dphidp(param, p), a, b)
                } else {
                    quad::gk(|p| self.dxdp(param, p), a, b)
                }
            } else {
                self.seg_integral(param, a, b, phase)
            }
        };
        let (mut lo, mut hi) = (p0, pb);
        let mut p = p0 + (x - x0) / self.dxdp(param, p0);
        if !(p > lo && p < hi) || !p.is_finite() {
            p = 0.5 * (lo + hi);
        }
        if x == x0 {
            return (p0, phi0);
        }
        for _ in 0..80 {
            let r = x0 + integ(p0, p, false) - x;
            if r > 0.0 {
                hi = p;
            } else {
                lo = p;
            }
            if r.abs() <= 1e-14 * (1.0 + x.abs()) {
                break;
            }
            let mut np = p - r / self.dxdp(param, p);
            if !(np > lo && np < hi) || !np.is_finite() {
                np = 0.5 * (lo + hi);
            }
            if (np - p).abs() <= 4e-16 * (1.0 + p.abs()) {
                p = np;
                break;
            }
            p = np;
        }
        (p, phi0 + integ(p0, p, true))
    }

    fn state_at(&self, param: Param, p: f64, phi: f64, x: f64) -> PointState {
        let sx = if x < 0.0 { -1.0 } else { 1.0 };
        let eta = self.eta_at(param, p);
        let amp = if self.kink { self.amp_at(param, p) } else { (self.model.r2() + eta).sqrt() };
        let a = if self.kink { sx * amp } else { amp };
        PointState { eta, a, u: self.u_of(eta), phi: sx * phi, deta: self.deta_of(eta, a, x) }
    }

    fn tail_state(&self, x: f64) -> PointState {
        let sx = if x < 0.0 { -1.0 } else { 1.0 };
        let (eta, amp, phi) = self.tail_eval(x.abs(), 0.0);
        let a = if self.kink { sx * amp } else { amp };
        PointState { eta, a, u: self.u_of(eta), phi: sx * phi, deta: self.deta_of(eta, a, x) }
    }

    fn table_end(&self) -> f64 {
        *self.segs.last().unwrap().x.last().unwrap()
    }

    /// Wave values at many abscissae; marches outward in |x| so each point
    /// costs a few Kronrod panels.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<PointState> {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()));
        let mut out = vec![PointState { eta: 0.0, a: 0.0, u: 0.0, phi: 0.0, deta: 0.0 }; xs.len()];
        let x_end = self.table_end();
        let (mut k, mut j) = (0usize, 0usize);
        let (mut p, mut xc, mut phi) = (0.0, 0.0, 0.0);
        for idx in order {
            let x = xs[idx];
            let ax = x.abs();
            if ax > x_end {
                out[idx] = self.tail_state(x);
                continue;
            }
            while ax > self.segs[k].x[j + 1] {
                j += 1;
                if j + 1 >= self.segs[k].p.len() {
                    k += 1;
                    j = 0;
                }
                let seg = &self.segs[k];
                p = seg.p[j];
                xc = seg.x[j];
                phi = seg.phi[j];
            }
            let seg = &self.segs[k];
            let (np, nphi) = self.invert_from(seg.param, p, xc, phi, seg.p[j + 1], ax, true);
            p = np;
            xc = ax;
            phi = nphi;
            out[idx] = self.state_at(seg.param, p, phi, x);
        }
        out
    }

    fn deta_of(&self, eta: f64, a: f64, x: f64) -> f64 {
        if self.kink {
            return 2.0 * a * self.model.big_f(a * a).sqrt();
        }
        let v = (eta * eta * self.neg_w(eta)).max(0.0).sqrt();
        -self.sign * x.signum() * v
    }

    /// Wave values at abscissa `x`.
    pub fn eval(&self, x: f64) -> PointState {
        let ax = x.abs();
        if ax > self.table_end() {
            return self.tail_state(x);
        }
        let seg = if ax <= *self.segs[0].x.last().unwrap() { &self.segs[0] } else { self.segs.last().unwrap() };
        let j = match seg.x.partition_point(|&v| v <= ax) {
            0 => 0,
            k => (k - 1).min(seg.p.len() - 2),
        };
        let (p, phi) = self.invert_from(seg.param, seg.p[j], seg.x[j], seg.phi[j], seg.p[j + 1], ax, false);
        self.state_at(seg.param, p, phi, x)
    }

    fn tail_eval(&self, ax: f64, x_end: f64) -> (f64, f64, f64) {
        let r2 = self.model.r2();
        let (xs, ds, phis) = self.stitch;
        if self.kink {
            let d = ds * (-self.model.c_s * (ax - xs)).exp();
            let a = self.r0() - d;
            return (a * a - r2, a, 0.0);
        }
        if self.sonic {
            let mm = self.m as f64 + 1.0;
            let b = 0.5 * mm * self.lambda.abs().sqrt();
            let e = |x: f64| (ds.powf(-0.5 * mm) + b * (x - xs)).powf(-2.0 / mm);
            let eta = self.sign * e(ax);
            let phi = phis
                + self.sign
                    * quad::integrate(|x| 0.5 * self.c * e(x) / (r2 + self.sign * e(x)), xs, ax, 1e-15, 1e-13).value;
            return (eta, (r2 + eta).sqrt(), phi);
        }
        let _ = x_end;
        let k = self.rate;
        let eta = self.sign * ds * (-k * (ax - xs)).exp();
        let eta_s = self.sign * ds;
        let phi = phis + 0.5 * self.c / k * ((r2 + eta_s) / (r2 + eta)).ln();
        (eta, (r2 + eta).sqrt(), phi)
    }

    pub fn theta_c(&self) -> Option<f64> {
        self.theta
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }
}

/// Default half-length `30/√(c_s² − c²)`.
pub fn auto_half_length(model: &NonlinearityModel, c: f64) -> Option<f64> {
    let d = model.c_s * model.c_s - c * c;
    (d > 1e-12 * model.c_s * model.c_s).then(|| 30.0 / d.sqrt())
}

/// Construct the travelling wave of speed `c` on the grid described by `grid`.
pub fn solve_profile(model: &NonlinearityModel, c: f64, grid: GridSpec) -> Result<WaveProfile> {
    let v = find_xi_c(model, c);
    if v.xi_c.is_none() {
        return Err(Error::NoWave(format!("c = {c}: {}", v.diagnostic.clone().unwrap_or_default())));
    }
    let sonic = v.status == Status::Sonic;
    let l = match grid.half_length {
        Some(l) => l,
        None if sonic => 200.0 / model.c_s,
        None => auto_half_length(model, c).unwrap(),
    };
    let solver = ProfileSolver::new(model, c, l)?;
    let grid = match grid.spacing {
        Spacing::Auto if !solver.kink => {
            let min_a = (model.r2() + v.xi_c.unwrap().min(0.0)).max(0.0).sqrt();
            GridSpec { spacing: Spacing::Step((0.1 * min_a).clamp(1e-3, 0.05)), ..grid }
        }
        _ => grid,
    };
    let x = grid.nodes(l)?;
    let pts = solver.eval_many(&x);
    let finite_energy = !sonic || model.m_index.is_some_and(|m| m <= 2);
    Ok(WaveProfile {
        c,
        xi_c: v.xi_c,
        r0: model.r0,
        h: x[1] - x[0],
        half_length: l,
        eta: pts.iter().map(|p| p.eta).collect(),
        a: pts.iter().map(|p| p.a).collect(),
        u: pts.iter().map(|p| p.u).collect(),
        phi: pts.iter().map(|p| p.phi).collect(),
        deta: pts.iter().map(|p| p.deta).collect(),
        x,
        theta_c: solver.theta_c(),
        tail: solver.tail(),
        kink: solver.kink,
        sonic,
        finite_energy,
    })
}

impl WaveProfile {
    /// The constant wave `U ≡ r0` on the given grid.
    pub fn constant(model: &NonlinearityModel, c: f64, grid: GridSpec) -> Result<WaveProfile> {
        let l = grid.half_length.ok_or_else(|| Error::Domain("constant wave needs a half-length".into()))?;
        let x = grid.nodes(l)?;
        let n = x.len();
        Ok(WaveProfile {
            c,
            xi_c: None,
            r0: model.r0,
            h: x[1] - x[0],
            half_length: l,
            eta: vec![0.0; n],
            a: vec![model.r0; n],
            u: vec![0.0; n],
            phi: vec![0.0; n],
            deta: vec![0.0; n],
            x,
            theta_c: Some(0.0),
            tail: Tail { kind: TailKind::None, rate_or_exponent: 0.0, amplitude: 0.0 },
            kink: false,
            sonic: false,
            finite_energy: true,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.r0 * self.r0 + self.eta[i]
    }

    /// `U_i = A_i e^{iφ_i}`.
    pub fn sample_complex(&self) -> Vec<Complex64> {
        self.a.iter().zip(&self.phi).map(|(&a, &p)| Complex64::from_polar(1.0, p) * a).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Positive rate (exponential) or exponent (algebraic, negative).
    pub rate_or_exponent: f64,
    pub amplitude: f64,
}

/// Least-squares fit of the tail of |η| on `[0.6L, 0.9L]`.
pub fn decay_fit(profile: &WaveProfile) -> Result<DecayFit> {
    let l = profile.half_length;
    let mut xs = vec![];
    let mut ys = vec![];
    for (i, &x) in profile.x.iter().enumerate() {
        if x >= 0.6 * l && x <= 0.9 * l {
            let e = profile.eta[i].abs();
            if !(e > 1e-290) {
                return Err(Error::TailUnderflow(format!("|eta| = {e} at x = {x}; use a smaller half-length")));
            }
            xs.push(if profile.sonic { x.ln() } else { x });
            ys.push(e.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Fit("fewer than 3 tail points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let amp = (my - slope * mx).exp();
    Ok(DecayFit { rate_or_exponent: if profile.sonic { slope } else { -slope }, amplitude: amp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{d1, d2_apply};
    use crate::nonlinearity::{make_model, ModelSpec};

    fn gp() -> NonlinearityModel {
        make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap()
    }

    // conjugate of the usual closed form, which solves the equation with −c
    fn gp_closed(c: f64, x: f64) -> Complex64 {
        let s = (2.0 - c * c).sqrt();
        Complex64::new((s * s / 2.0).sqrt() * (x * s / 2.0).tanh(), c / 2f64.sqrt())
    }

    #[test]
    fn gp_matches_closed_form() {
        let m = gp();
        for &c in &[0.5, 1.0] {
            let p = solve_profile(&m, c, GridSpec::step(0.05)).unwrap();
            let u = p.sample_complex();
            let i0 = p.len() / 2;
            let rot = gp_closed(c, 0.0) / u[i0];
            let err = u.iter().zip(&p.x).map(|(v, &x)| (v * rot - gp_closed(c, x)).norm()).fold(0.0, f64::max);
            assert!(err < 1e-6, "c={c} err={err}");
        }
    }

    #[test]
    fn gp_kink_is_tanh() {
        let p = solve_profile(&gp(), 0.0, GridSpec::step(0.05).with_half_length(20.0)).unwrap();
        assert!(p.kink);
        let err = p.a.iter().zip(&p.x).map(|(a, &x)| (a - (x / 2f64.sqrt()).tanh()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(p.u.iter().all(|&u| u == 0.0));
        assert_eq!(p.sample_complex()[p.len() / 2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn structural_invariants() {
        let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 1.5, -1.5])).unwrap();
        let p = solve_profile(&m, 0.9, GridSpec::step(0.005).with_half_length(15.0)).unwrap();
        let n = p.len();
        assert_eq!(p.eta[n / 2], p.xi_c.unwrap());
        for i in 0..n {
            assert!((p.eta[i] - p.eta[n - 1 - i]).abs() < 1e-12);
            assert!((2.0 * p.u[i] * (p.eta[i] + 1.0) - p.c * p.eta[i]).abs() < 1e-10);
            assert!(((p.sample_complex()[i].norm_sqr() - 1.0) - p.eta[i]).abs() < 1e-12);
        }
        for i in n / 2..n - 1 {
            assert!(p.eta[i + 1].abs() <= p.eta[i].abs() + 1e-15);
        }
        // first integral with 4th-order differences
        let de = d1(&p.eta, p.h);
        let vmax = p.eta.iter().map(|&e| potential::v_c_unchecked(&m, p.c, e).abs()).fold(0.0, f64::max);
        for i in 2..n - 2 {
            let r = de[i] * de[i] + potential::v_c_unchecked(&m, p.c, p.eta[i]);
            assert!(r.abs() <= 1e-8 * vmax, "{i} {r}");
            assert!((de[i] - p.deta[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn newton_ode_cross_check() {
        let m = gp();
        let c = 0.8;
        let p = solve_profile(&m, c, GridSpec::step(0.01).with_half_length(16.0)).unwrap();
        let i1 = p.x.iter().position(|&x| (x - 1.0).abs() < 1e-9).unwrap();
        // RK4 on 2η″ = −𝒱′(η)
        let acc = |e: f64| -0.5 * potential::v_c_prime_unchecked(&m, c, e);
        let (mut e, mut de) = (p.eta[i1], p.deta[i1]);
        let h = p.h;
        let mut worst: f64 = 0.0;
        let stop = p.half_length / 2.0;
        let mut i = i1;
        while p.x[i] < stop {
            let k1 = (de, acc(e));
            let k2 = (de + 0.5 * h * k1.1, acc(e + 0.5 * h * k1.0));
            let k3 = (de + 0.5 * h * k2.1, acc(e + 0.5 * h * k2.0));
            let k4 = (de + h * k3.1, acc(e + h * k3.0));
            e += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            de += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            i += 1;
            worst = worst.max((e - p.eta[i]).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn phase_shift_stable_under_longer_domain() {
        let m = gp();
        let c = 1.0;
        let l = auto_half_length(&m, c).unwrap();
        let p1 = solve_profile(&m, c, GridSpec::step(0.05).with_half_length(l)).unwrap();
        let p2 = solve_profile(&m, c, GridSpec::step(0.05).with_half_length(1.25 * l)).unwrap();
        let j1 = p1.phi.last().unwrap() - p1.phi[0];
        let j2 = p2.phi.last().unwrap() - p2.phi[0];
        assert!((j1 - j2).abs() < 1e-6);
        // GP: Θ_c = arctan(√(2−c²)/c)·(−1) for a dark wave with ξ_c < 0
        let exact = -((2.0 - c * c).sqrt() / c).atan();
        assert!((p1.theta_c.unwrap() - exact).abs() < 1e-9, "{:?}", p1.theta_c);
        assert!((j1 - 2.0 * exact).abs() < 1e-6);
    }

    #[test]
    fn decay_rates() {
        let m = gp();
        let p = solve_profile(&m, 1.0, GridSpec::step(0.05)).unwrap();
        let f = decay_fit(&p).unwrap();
        assert!((f.rate_or_exponent - 1.0).abs() < 0.02);
        let k = solve_profile(&m, 0.0, GridSpec::step(0.05).with_half_length(20.0)).unwrap();
        let f = decay_fit(&k).unwrap();
        assert!((f.rate_or_exponent - 2f64.sqrt()).abs() < 0.02 * 2f64.sqrt());
    }

    #[test]
    fn quintic_sonic_exponent() {
        let m = make_model(&ModelSpec::polynomial(1.0, &[-2.0, 3.0, -4.0, 5.0, -12.0])).unwrap();
        let p = solve_profile(&m, m.c_s, GridSpec::step(0.25).with_half_length(2000.0)).unwrap();
        assert!(p.sonic && !p.finite_energy);
        let f = decay_fit(&p).unwrap();
        assert!((f.rate_or_exponent + 0.5).abs() < 0.025, "{f:?}");
    }

    #[test]
    fn no_wave_above_speed_of_sound() {
        assert!(matches!(solve_profile(&gp(), 1.5, GridSpec::default()), Err(Error::NoWave(_))));
    }

    #[test]
    fn constant_wave_samples_r0() {
        let p = WaveProfile::constant(&gp(), 0.3, GridSpec::step(0.1).with_half_length(5.0)).unwrap();
        assert!(p.sample_complex().iter().all(|u| (u - 1.0).norm() == 0.0));
    }

    #[test]
    fn tail_underflow_reported() {
        let p = solve_profile(&gp(), 0.2, GridSpec::step(0.1).with_half_length(600.0)).unwrap();
        assert!(matches!(decay_fit(&p), Err(Error::TailUnderflow(_))));
    }

    #[test]
    fn second_derivative_matches_newton_equation() {
        let m = gp();
        let p = solve_profile(&m, 0.6, GridSpec::step(0.02)).unwrap();
        let dd = d2_apply(&p.eta, p.h);
        for i in 3..p.len() - 3 {
            let r = 2.0 * dd[i] + potential::v_c_prime_unchecked(&m, 0.6, p.eta[i]);
            assert!(r.abs() < 1e-5, "{i} {r}");
        }
    }
}
