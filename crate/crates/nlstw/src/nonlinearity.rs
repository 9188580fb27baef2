//! The nonlinearity `f`, its antiderivative `F(ρ) = ∫_ρ^{r0²} f`, and the
//! constants derived from them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Polynomial,
    GrossPitaevskii,
    SaturatedExponential,
    SaturatedRational,
    TanhProfile,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Polynomial => "polynomial",
            Kind::GrossPitaevskii => "gross_pitaevskii",
            Kind::SaturatedExponential => "saturated_exponential",
            Kind::SaturatedRational => "saturated_rational",
            Kind::TanhProfile => "tanh_profile",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Some(match s {
            "polynomial" => Kind::Polynomial,
            "gross_pitaevskii" => Kind::GrossPitaevskii,
            "saturated_exponential" => Kind::SaturatedExponential,
            "saturated_rational" => Kind::SaturatedRational,
            "tanh_profile" => Kind::TanhProfile,
            _ => return None,
        })
    }

    fn params(self) -> &'static [&'static str] {
        match self {
            Kind::Polynomial | Kind::GrossPitaevskii => &[],
            Kind::SaturatedExponential => &["rho0"],
            Kind::SaturatedRational => &["rho0", "nu"],
            Kind::TanhProfile => &["alpha", "gamma", "rho0", "sigma"],
        }
    }
}

/// Parameter names accepted anywhere in a model description.
pub const PARAM_NAMES: [&str; 7] = ["rho0", "alpha", "beta", "gamma", "nu", "sigma", "kappa"];

/// Unvalidated description of a model, as read from a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: Kind,
    pub r0: Option<f64>,
    pub coeffs: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn polynomial(r0: f64, coeffs: &[f64]) -> Self {
        ModelSpec { kind: Kind::Polynomial, r0: Some(r0), coeffs: coeffs.to_vec(), params: BTreeMap::new() }
    }

    pub fn gross_pitaevskii(r0: f64) -> Self {
        ModelSpec { kind: Kind::GrossPitaevskii, r0: Some(r0), coeffs: vec![], params: BTreeMap::new() }
    }

    pub fn analytic(kind: Kind, r0: Option<f64>, params: &[(&str, f64)]) -> Self {
        ModelSpec {
            kind,
            r0,
            coeffs: vec![],
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 11] = [
    "gp",
    "cqs1",
    "cqs2_36",
    "cqs2_60",
    "cqs3",
    "degenerate",
    "degenerate_perturbed",
    "saturated_exponential",
    "saturated_rational",
    "cubic_quintic",
    "quintic",
];

/// Named example models, all with `r0 = 1`.
pub fn builtin(name: &str) -> Option<ModelSpec> {
    let p = ModelSpec::polynomial;
    Some(match name {
        "gp" => ModelSpec::gross_pitaevskii(1.0),
        "cqs1" => p(1.0, &[-1.0, 1.5, -1.5]),
        "cqs2_36" => p(1.0, &[-4.0, 0.0, -36.0]),
        "cqs2_60" => p(1.0, &[-4.0, 0.0, -60.0]),
        "cqs3" => p(1.0, &[-0.5, 0.75, -2.0]),
        "degenerate" => p(1.0, &[-2.0, 3.0, -4.0, 5.0, -6.0]),
        "degenerate_perturbed" => p(1.0, &[-2.0, 3.0 - 1e-3, -4.0, 5.0, -6.0]),
        "saturated_exponential" => ModelSpec::analytic(Kind::SaturatedExponential, Some(1.0), &[("rho0", 0.4)]),
        "saturated_rational" => {
            ModelSpec::analytic(Kind::SaturatedRational, Some(1.0), &[("rho0", 0.08), ("nu", 2.0)])
        }
        "cubic_quintic" => p(1.0, &[-1.0, -3.0]),
        "quintic" => p(1.0, &[-2.0, 3.0, -4.0, 5.0, -12.0]),
        _ => return None,
    })
}

/// `f(ϱ) = 1 − ϱ + κ(1 − ϱ)³`.
pub fn kappa_family(kappa: f64) -> ModelSpec {
    ModelSpec::polynomial(1.0, &[-1.0, 0.0, -kappa])
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityModel {
    pub kind: Kind,
    pub r0: f64,
    /// Shifted coefficients: `coeffs[j-1]` multiplies `(ρ − r0²)^j`.
    pub coeffs: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub c_s: f64,
    pub m_index: Option<usize>,
    pub lambda_m: Option<f64>,
    /// Taylor coefficients `f^{(j)}(r0²)/j!`, `j = 0..`.
    #[serde(skip)]
    taylor: Vec<f64>,
}

const TAYLOR_LEN: usize = 12;

/// Validate `spec` and compute `c_s`, the Taylor data and the sonic index.
pub fn make_model(spec: &ModelSpec) -> Result<NonlinearityModel> {
    for k in spec.params.keys() {
        if !PARAM_NAMES.contains(&k.as_str()) {
            return Err(Error::InvalidModel(format!("unknown parameter `{k}`")));
        }
        if !spec.kind.params().contains(&k.as_str()) {
            return Err(Error::InvalidModel(format!("parameter `{k}` not used by kind {}", spec.kind.name())));
        }
    }
    for (k, v) in &spec.params {
        if !v.is_finite() {
            return Err(Error::InvalidModel(format!("parameter `{k}` is not finite")));
        }
    }
    let get = |k: &str| -> Result<f64> {
        spec.params
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidModel(format!("{} needs parameter `{k}`", spec.kind.name())))
    };
    let (r0, coeffs) = match spec.kind {
        Kind::Polynomial => {
            if spec.coeffs.is_empty() {
                return Err(Error::InvalidModel("polynomial needs coeffs a_1..a_d".into()));
            }
            if spec.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidModel("non-finite coefficient".into()));
            }
            (spec.r0.unwrap_or(1.0), spec.coeffs.clone())
        }
        Kind::GrossPitaevskii => {
            if !spec.coeffs.is_empty() {
                return Err(Error::InvalidModel("gross_pitaevskii takes no coeffs".into()));
            }
            (spec.r0.unwrap_or(1.0), vec![-1.0])
        }
        Kind::SaturatedExponential | Kind::SaturatedRational => {
            if get("rho0")? <= 0.0 {
                return Err(Error::InvalidModel("rho0 must be positive".into()));
            }
            if spec.kind == Kind::SaturatedRational && spec.params.get("nu").is_some_and(|&n| n <= 0.0) {
                return Err(Error::InvalidModel("nu must be positive".into()));
            }
            (spec.r0.unwrap_or(1.0), vec![])
        }
        Kind::TanhProfile => {
            let (alpha, gamma, rho0, sigma) = (get("alpha")?, get("gamma")?, get("rho0")?, get("sigma")?);
            if alpha <= 0.0 || sigma <= 0.0 || rho0 <= 0.0 {
                return Err(Error::InvalidModel("alpha, rho0, sigma must be positive".into()));
            }
            if gamma <= 1.0 {
                return Err(Error::InvalidModel("tanh_profile has no positive zero unless gamma > 1".into()));
            }
            let r4 = rho0 * rho0 + sigma * sigma * (-1.0 / gamma).atanh();
            if r4 <= 0.0 {
                return Err(Error::InvalidModel("tanh_profile zero is not positive".into()));
            }
            let r0 = r4.sqrt().sqrt();
            if let Some(given) = spec.r0 {
                if (given - r0).abs() > 1e-12 * r0 {
                    return Err(Error::InvalidModel(format!("r0 = {given} does not match the zero of f at r0 = {r0}")));
                }
            }
            (r0, vec![])
        }
    };
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::InvalidModel("r0 must be positive".into()));
    }
    let mut model = NonlinearityModel {
        kind: spec.kind,
        r0,
        coeffs,
        params: spec.params.clone(),
        c_s: 0.0,
        m_index: None,
        lambda_m: None,
        taylor: vec![],
    };
    model.taylor = model.compute_taylor();
    let fp = model.fp(r0 * r0);
    if !(fp < 0.0) {
        return Err(Error::InvalidModel(format!("not defocusing: f'(r0^2) = {fp} >= 0")));
    }
    model.c_s = (-2.0 * r0 * r0 * fp).sqrt();
    let r2 = r0 * r0;
    for k in 1..=5 {
        for s in [-1.0, 1.0] {
            let rho = r2 * (1.0 + s * 1e-3 * k as f64);
            if !(model.big_f(rho) > 0.0) {
                return Err(Error::InvalidModel(format!("F not positive near r0^2 (at {rho})")));
            }
        }
    }
    if let Some((m, l)) = model.compute_sonic_index() {
        model.m_index = Some(m);
        model.lambda_m = Some(l);
    }
    Ok(model)
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl NonlinearityModel {
    pub fn r2(&self) -> f64 {
        self.r0 * self.r0
    }

    fn param(&self, k: &str, default: f64) -> f64 {
        self.params.get(k).copied().unwrap_or(default)
    }

    fn is_polynomial(&self) -> bool {
        matches!(self.kind, Kind::Polynomial | Kind::GrossPitaevskii)
    }

    /// f(ρ) without domain checks.
    pub fn f(&self, rho: f64) -> f64 {
        let r2 = self.r2();
        match self.kind {
            Kind::Polynomial | Kind::GrossPitaevskii => {
                let u = rho - r2;
                u * horner(&self.coeffs, u)
            }
            Kind::SaturatedExponential => {
                let rho0 = self.param("rho0", 1.0);
                ((r2 - rho) / rho0).exp_m1()
            }
            Kind::SaturatedRational => {
                let (rho0, nu) = (self.param("rho0", 1.0), self.param("nu", 2.0));
                0.5 * rho0 * ((1.0 + rho / rho0).powf(-nu) - (1.0 + r2 / rho0).powf(-nu))
            }
            Kind::TanhProfile => {
                let (a, g, rho0, s) = self.tanh_params();
                -a * rho * (1.0 + g * ((rho * rho - rho0 * rho0) / (s * s)).tanh())
            }
        }
    }

    /// f′(ρ).
    pub fn fp(&self, rho: f64) -> f64 {
        let r2 = self.r2();
        match self.kind {
            Kind::Polynomial | Kind::GrossPitaevskii => {
                let u = rho - r2;
                let d: Vec<f64> = self.coeffs.iter().enumerate().map(|(j, a)| (j + 1) as f64 * a).collect();
                horner(&d, u)
            }
            Kind::SaturatedExponential => {
                let rho0 = self.param("rho0", 1.0);
                -((r2 - rho) / rho0).exp() / rho0
            }
            Kind::SaturatedRational => {
                let (rho0, nu) = (self.param("rho0", 1.0), self.param("nu", 2.0));
                -0.5 * nu * (1.0 + rho / rho0).powf(-nu - 1.0)
            }
            Kind::TanhProfile => {
                let (a, g, rho0, s) = self.tanh_params();
                let th = ((rho * rho - rho0 * rho0) / (s * s)).tanh();
                -a * (1.0 + g * th) - a * rho * g * (1.0 - th * th) * 2.0 * rho / (s * s)
            }
        }
    }

    fn tanh_params(&self) -> (f64, f64, f64, f64) {
        (self.param("alpha", 1.0), self.param("gamma", 2.0), self.param("rho0", 1.0), self.param("sigma", 1.0))
    }

    fn f_complex(&self, z: Complex64) -> Complex64 {
        let r2 = self.r2();
        match self.kind {
            Kind::Polynomial | Kind::GrossPitaevskii => {
                let u = z - r2;
                u * self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * u + a)
            }
            Kind::SaturatedExponential => {
                let rho0 = self.param("rho0", 1.0);
                ((-z + r2) / rho0).exp() - 1.0
            }
            Kind::SaturatedRational => {
                let (rho0, nu) = (self.param("rho0", 1.0), self.param("nu", 2.0));
                ((z / rho0 + 1.0).powf(-nu) - (1.0 + r2 / rho0).powf(-nu)) * (0.5 * rho0)
            }
            Kind::TanhProfile => {
                let (a, g, rho0, s) = self.tanh_params();
                -z * a * (((z * z - rho0 * rho0) / (s * s)).tanh() * g + 1.0)
            }
        }
    }

    /// Radius of the Cauchy circle around r0² used for Taylor coefficients.
    fn taylor_radius(&self) -> f64 {
        let r2 = self.r2();
        match self.kind {
            Kind::Polynomial | Kind::GrossPitaevskii | Kind::SaturatedExponential => r2.max(1.0) * 0.5,
            Kind::SaturatedRational => 0.5 * (r2 + self.param("rho0", 1.0)),
            Kind::TanhProfile => {
                let (_, _, rho0, s) = self.tanh_params();
                // poles of tanh at ρ² = ρ0² ± iπσ²(k + 1/2)
                let w = Complex64::new(rho0 * rho0, 0.5 * PI * s * s).sqrt();
                let d = ((w.re - r2).powi(2) + w.im.powi(2)).sqrt().min(((-w.re - r2).powi(2) + w.im.powi(2)).sqrt());
                0.5 * d
            }
        }
    }

    fn compute_taylor(&self) -> Vec<f64> {
        if self.is_polynomial() {
            let mut t = vec![0.0; TAYLOR_LEN.max(self.coeffs.len() + 1)];
            for (j, a) in self.coeffs.iter().enumerate() {
                t[j + 1] = *a;
            }
            return t;
        }
        let n = 128;
        let rad = self.taylor_radius();
        let r2 = self.r2();
        let vals: Vec<Complex64> = (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                self.f_complex(Complex64::from_polar(rad, th) + r2)
            })
            .collect();
        let mut t = vec![0.0; TAYLOR_LEN];
        for (j, tj) in t.iter_mut().enumerate().skip(1) {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum();
            *tj = s.re / n as f64 / rad.powi(j as i32);
        }
        t
    }

    /// Taylor coefficients `f^{(j)}(r0²)/j!`.
    pub fn taylor(&self) -> &[f64] {
        &self.taylor
    }

    /// `F(ρ) = ∫_ρ^{r0²} f`.
    pub fn big_f(&self, rho: f64) -> f64 {
        let xi = rho - self.r2();
        xi * xi * self.g(xi)
    }

    /// `F(r0² + ξ)/ξ²`, evaluated without cancellation near ξ = 0.
    pub fn g(&self, xi: f64) -> f64 {
        if self.is_polynomial() {
            // F(r0²+ξ) = −Σ a_j ξ^{j+1}/(j+1)
            let c: Vec<f64> = self.coeffs.iter().enumerate().map(|(j, a)| -a / (j + 2) as f64).collect();
            return horner(&c, xi);
        }
        if xi.abs() < 1e-3 * self.r2() {
            let c: Vec<f64> = self.taylor[1..].iter().enumerate().map(|(j, t)| -t / (j + 2) as f64).collect();
            return horner(&c, xi);
        }
        let r2 = self.r2();
        let tol = 1e-12 * xi * xi;
        let v = quad::integrate(|s| self.f(r2 + s), 0.0, xi, tol.min(1e-12), 1e-14).value;
        -v / (xi * xi)
    }

    pub fn eval_f(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.f(rho))
    }

    pub fn eval_fp(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.fp(rho))
    }

    pub fn eval_big_f(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.big_f(rho))
    }

    /// Coefficient of ξ^k in 𝒱_c minus its c²ξ² part.
    pub fn potential_coeff(&self, k: usize) -> f64 {
        let t = |j: usize| self.taylor.get(j).copied().unwrap_or(0.0);
        if k < 2 {
            return 0.0;
        }
        let a = self.r2() * t(k - 1) / k as f64;
        let b = if k >= 3 { t(k - 2) / (k - 1) as f64 } else { 0.0 };
        4.0 * (a + b)
    }

    fn compute_sonic_index(&self) -> Option<(usize, f64)> {
        let cs2 = self.c_s * self.c_s;
        for m in 0..=6usize {
            let k = m + 3;
            if k + 1 > self.taylor.len() + 1 {
                break;
            }
            let lam = self.potential_coeff(k);
            let norm = lam * self.r2().powi(k as i32 - 2) / cs2;
            if norm.abs() > 1e-9 {
                return Some((m, lam));
            }
        }
        None
    }

    /// `(m, Λ_m)`, or `None` when every tested coefficient vanishes.
    pub fn sonic_index(&self) -> Option<(usize, f64)> {
        self.m_index.zip(self.lambda_m)
    }

    /// True when `F > 0` on `[0, r0²)`, i.e. the stationary wave is a kink.
    pub fn has_kink(&self) -> bool {
        let r2 = self.r2();
        (0..=400).all(|i| {
            let rho = r2 * i as f64 / 400.0;
            i == 400 || self.big_f(rho) > 0.0
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho < 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!("rho = {rho} must be non-negative")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quintic() -> NonlinearityModel {
        make_model(&ModelSpec::polynomial(1.0, &[-2.0, 3.0, -4.0, 5.0, -12.0])).unwrap()
    }

    #[test]
    fn gp_constants() {
        let m = make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap();
        assert!((m.c_s - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.eval_big_f(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.eval_big_f(1.0).unwrap(), 0.0);
        assert_eq!(m.sonic_index(), Some((0, -2.0)));
    }

    #[test]
    fn quintic_sonic_index() {
        let m = quintic();
        assert!((m.c_s - 2.0).abs() < 1e-15);
        let (k, l) = m.sonic_index().unwrap();
        assert_eq!(k, 3);
        assert!((l + 4.0).abs() < 1e-12);
        assert!((m.potential_coeff(7) + 8.0).abs() < 1e-12);
        for k in 3..6 {
            assert!(m.potential_coeff(k).abs() < 1e-12);
        }
    }

    #[test]
    fn tuned_m_one() {
        // t1 = −1, t2 chosen so the ξ³ coefficient cancels: 4(t2/3 − 1/2) = 0
        let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 1.5, 0.0])).unwrap();
        let (k, l) = m.sonic_index().unwrap();
        assert_eq!(k, 1);
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_family_f0() {
        for kappa in [0.0, 1.0, 5.0, 20.0] {
            let m = make_model(&ModelSpec::polynomial(1.0, &[-1.0, 0.0, -kappa])).unwrap();
            assert!((m.big_f(0.0) - (0.5 + kappa / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(make_model(&ModelSpec::polynomial(1.0, &[1.0])), Err(Error::InvalidModel(_))));
        assert!(make_model(&ModelSpec::polynomial(-1.0, &[-1.0])).is_err());
        assert!(make_model(&ModelSpec::polynomial(1.0, &[])).is_err());
        let mut s = ModelSpec::gross_pitaevskii(1.0);
        s.params.insert("kappa".into(), 1.0);
        assert!(make_model(&s).is_err());
        let m = make_model(&ModelSpec::gross_pitaevskii(1.0)).unwrap();
        assert!(matches!(m.eval_f(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn saturated_exponential_closed_form() {
        let rho0 = 0.4;
        let m = make_model(&ModelSpec::analytic(Kind::SaturatedExponential, None, &[("rho0", rho0)])).unwrap();
        let exact = |rho: f64| rho0 * ((1.0 - rho) / rho0).exp_m1() - (1.0 - rho);
        for &rho in &[0.0, 0.2, 0.7, 0.999, 1.0005, 1.3, 2.5] {
            let e = exact(rho);
            assert!((m.big_f(rho) - e).abs() <= 1e-12 + 1e-11 * e.abs(), "{rho}");
        }
        assert!((m.c_s - (2.0 / rho0).sqrt()).abs() < 1e-14);
        // t_j = (−1/ρ0)^j / j!
        let mut fact = 1.0;
        for j in 1..8 {
            fact *= j as f64;
            let e = (-1.0 / rho0).powi(j as i32) / fact;
            assert!((m.taylor()[j] - e).abs() < 1e-10 * e.abs().max(1.0), "t{j}");
        }
    }

    #[test]
    fn saturated_rational_and_tanh() {
        let m = make_model(&ModelSpec::analytic(Kind::SaturatedRational, None, &[("rho0", 0.08), ("nu", 2.0)])).unwrap();
        assert!(m.f(1.0).abs() < 1e-15);
        assert!(m.c_s > 0.0);
        let spec = ModelSpec::analytic(Kind::TanhProfile, None, &[("alpha", 1.0), ("gamma", 2.0), ("rho0", 1.0), ("sigma", 1.0)]);
        let t = make_model(&spec).unwrap();
        assert!(t.f(t.r2()).abs() < 1e-14);
        assert!((t.c_s * t.c_s + 2.0 * t.r2() * t.fp(t.r2())).abs() < 1e-14);
        let mut bad = spec.clone();
        bad.r0 = Some(1.0);
        assert!(make_model(&bad).is_err());
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_NAMES {
            let m = make_model(&builtin(name).unwrap()).unwrap();
            assert!(m.c_s > 0.0, "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn taylor_matches_derivative_for_analytic_kinds() {
        let m = make_model(&ModelSpec::analytic(Kind::SaturatedRational, None, &[("rho0", 0.5), ("nu", 1.5)])).unwrap();
        assert!((m.taylor()[1] - m.fp(1.0)).abs() < 1e-12);
        let h = 1e-4;
        let d2 = (m.f(1.0 + h) - 2.0 * m.f(1.0) + m.f(1.0 - h)) / (h * h) / 2.0;
        assert!((m.taylor()[2] - d2).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn polynomial_f_matches_exact_antiderivative(a in prop::collection::vec(-5.0f64..5.0, 1..6), rho in 0.0f64..3.0) {
            let mut coeffs = a.clone();
            coeffs[0] = -coeffs[0].abs() - 0.1;
            let m = make_model(&ModelSpec::polynomial(1.0, &coeffs));
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            let u = rho - 1.0;
            let exact: f64 = -coeffs.iter().enumerate().map(|(j, c)| c * u.powi(j as i32 + 2) / (j + 2) as f64).sum::<f64>();
            let scale: f64 = coeffs.iter().enumerate().map(|(j, c)| (c * u.powi(j as i32 + 2) / (j + 2) as f64).abs()).sum();
            prop_assert!((m.big_f(rho) - exact).abs() <= 1e-14 * scale.max(1e-300) * 4.0);
        }

        #[test]
        fn dfdrho_is_minus_f(kind in 0usize..3, rho in 0.05f64..2.0) {
            let spec = match kind {
                0 => ModelSpec::polynomial(1.0, &[-1.0, 1.5, -1.5]),
                1 => ModelSpec::analytic(Kind::SaturatedExponential, None, &[("rho0", 0.4)]),
                _ => ModelSpec::analytic(Kind::SaturatedRational, None, &[("rho0", 0.08), ("nu", 2.0)]),
            };
            let m = make_model(&spec).unwrap();
            let mut best = f64::INFINITY;
            for h in [1e-4, 1e-5, 1e-6] {
                let d = (m.big_f(rho + h) - m.big_f(rho - h)) / (2.0 * h);
                best = best.min((d + m.f(rho)).abs() / m.f(rho).abs().max(1e-3));
            }
            prop_assert!(best < 1e-6, "{}", best);
        }

        #[test]
        fn speed_of_sound_identity(a1 in -4.0f64..-0.05, r0 in 0.3f64..3.0) {
            let m = make_model(&ModelSpec::polynomial(r0, &[a1, 0.3])).unwrap();
            prop_assert!((m.c_s * m.c_s + 2.0 * r0 * r0 * m.fp(r0 * r0)).abs() <= 1e-14 * m.c_s * m.c_s);
        }
    }
}
