use serde_json::Value;

use nlstw::dynamics::{
    d_hy, d_z, evolve, growth_rate, phase_pair, random_perturbation, FieldState, Observers, RunConfig, WaveRef,
};
use nlstw::invariants::{branch_point, diagram, energy, kink_dpdc, kink_energy, momentum_grid, Verdict};
use nlstw::potential::{find_xi_c, Status};
use nlstw::profile::{auto_half_length, Spacing};
use nlstw::spectrum::{build_operators, nls_mode_field, report, SpectrumReport};
use nlstw::{make_model, solve_profile, Error, GridSpec, NonlinearityModel, WaveProfile};

use crate::config::{Config, ConfigError};
use crate::output::{nums, num, obj, opt, to_text, Cell, Csv, OutDir};

pub enum Failure {
    Config(ConfigError),
    Model(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn missing(section: &str, key: &str) -> Failure {
    Failure::Config(ConfigError { line: 0, key: Some(format!("{section}.{key}")), message: "required".into() })
}

fn invalid(section: &str, key: &str, message: impl Into<String>) -> Failure {
    Failure::Config(ConfigError { line: 0, key: Some(format!("{section}.{key}")), message: message.into() })
}

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub out: OutDir,
}

type Outcome = Result<Value, Failure>;

fn model(cfg: &Config) -> Result<NonlinearityModel, Failure> {
    let spec = cfg.model_spec().map_err(Failure::Config)?;
    Ok(make_model(&spec)?)
}

fn grid(cfg: &Config) -> Result<GridSpec, Failure> {
    let mut g = GridSpec::default();
    match (cfg.int("grid", "points"), cfg.num("grid", "step")) {
        (Some(_), Some(_)) => return Err(invalid("grid", "step", "points and step are exclusive")),
        (Some(n), None) => g.spacing = Spacing::Points(n as usize),
        (None, Some(h)) => g.spacing = Spacing::Step(h),
        (None, None) => {}
    }
    if let Some(l) = cfg.num("grid", "half_length") {
        g = g.with_half_length(l);
    }
    Ok(g)
}

fn model_json(m: &NonlinearityModel) -> Value {
    obj([
        ("kind", Value::String(m.kind.name().into())),
        ("r0", num(m.r0)),
        ("c_s", num(m.c_s)),
        ("sonic_m", m.sonic_index().map_or(Value::Null, |(k, _)| Value::from(k))),
    ])
}

pub fn profile(ctx: &Context) -> Outcome {
    let m = model(ctx.cfg)?;
    let c = ctx.cfg.num("profile", "c").ok_or_else(|| missing("profile", "c"))?;
    let p = solve_profile(&m, c, grid(ctx.cfg)?)?;
    let mut csv = Csv::new(&["x", "eta", "a", "u", "phi", "deta"]);
    for i in 0..p.len() {
        csv.row(&[Cell::Num(p.x[i]), Cell::Num(p.eta[i]), Cell::Num(p.a[i]), Cell::Num(p.u[i]), Cell::Num(p.phi[i]), Cell::Num(p.deta[i])]);
    }
    ctx.out.write("profile.csv", &csv.into_string())?;
    let finite = p.finite_energy;
    let r = obj([
        ("command", "profile".into()),
        ("model", model_json(&m)),
        ("c", num(c)),
        ("xi_c", opt(p.xi_c)),
        ("points", p.len().into()),
        ("h", num(p.h)),
        ("half_length", num(p.half_length)),
        ("energy", opt(finite.then(|| energy(&m, &p).ok()).flatten())),
        ("momentum", opt(finite.then(|| momentum_grid(&m, &p).ok()).flatten())),
        (
            "tail",
            obj([
                ("kind", serde_json::to_value(p.tail.kind).unwrap()),
                ("rate_or_exponent", num(p.tail.rate_or_exponent)),
                ("amplitude", num(p.tail.amplitude)),
            ]),
        ),
        ("theta_c", opt(p.theta_c)),
        ("kink", p.kink.into()),
        ("sonic", p.sonic.into()),
        ("finite_energy", finite.into()),
    ]);
    ctx.out.write("profile.json", &to_text(&r))?;
    Ok(r)
}

pub fn diagram_cmd(ctx: &Context) -> Outcome {
    let m = model(ctx.cfg)?;
    let c_min = ctx.cfg.num("diagram", "c_min").unwrap_or(0.0);
    let c_max = ctx.cfg.num("diagram", "c_max").unwrap_or(m.c_s);
    let n = ctx.cfg.int("diagram", "n").unwrap_or(28) as usize;
    let d = diagram(&m, c_min, c_max, n)?;
    let mut csv = Csv::new(&["c", "xi_c", "E", "P", "dPdc", "d2Pdc2", "dEdc", "hamilton_residual", "one_sided", "verdict"]);
    for p in &d.points {
        csv.row(&[
            Cell::Num(p.c),
            Cell::Num(p.xi_c),
            Cell::Num(p.e),
            Cell::Num(p.p),
            Cell::Num(p.dpdc),
            Cell::Num(p.d2pdc2),
            Cell::Num(p.dedc),
            Cell::Num(p.hamilton_residual),
            Cell::Text(p.one_sided.to_string()),
            Cell::Text(p.verdict.name().into()),
        ]);
    }
    ctx.out.write("diagram.csv", &csv.into_string())?;
    let kink = d.kink.map_or(Value::Null, |k| {
        obj([("P_limit", num(k.p_limit)), ("dPdc0", num(k.dpdc_at_0)), ("E_kink", num(k.e_kink))])
    });
    let r = obj([
        ("command", "diagram".into()),
        ("model", model_json(&m)),
        ("c_min", num(c_min)),
        ("c_max", num(c_max)),
        ("n", n.into()),
        ("points", d.points.len().into()),
        ("gaps", nums(&d.gaps)),
        ("cusps", nums(&d.cusps)),
        ("kink", kink),
        ("unstable", d.points.iter().filter(|p| p.verdict != Verdict::Stable).count().into()),
    ]);
    ctx.out.write("diagram.json", &to_text(&r))?;
    Ok(r)
}

fn kink_verdict(dpdc0: f64) -> &'static str {
    if dpdc0 < 0.0 {
        "stable"
    } else {
        "unstable"
    }
}

pub fn kink(ctx: &Context) -> Outcome {
    let m = model(ctx.cfg)?;
    let e = kink_energy(&m)?;
    let k = kink_dpdc(&m)?;
    let r = obj([
        ("command", "kink".into()),
        ("model", model_json(&m)),
        ("E_kink", num(e)),
        ("dPdc0", num(k.dpdc0)),
        ("VK0", num(k.vk0)),
        ("verdict", kink_verdict(k.dpdc0).into()),
    ]);
    ctx.out.write("kink.json", &to_text(&r))?;
    Ok(r)
}

pub fn classify(ctx: &Context) -> Outcome {
    let m = model(ctx.cfg)?;
    let c = ctx.cfg.num("classify", "c").ok_or_else(|| missing("classify", "c"))?;
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("c = {c} must be non-negative")).into());
    }
    let v = find_xi_c(&m, c);
    let status = serde_json::to_value(v.status).unwrap();
    let branch = match (v.status, v.xi_c) {
        (Status::Kink, _) => {
            let k = kink_dpdc(&m)?;
            obj([
                ("E", num(kink_energy(&m)?)),
                ("dPdc", num(k.dpdc0)),
                ("verdict", kink_verdict(k.dpdc0).into()),
            ])
        }
        (_, Some(xi)) => match branch_point(&m, c, xi) {
            Ok(p) => obj([
                ("E", num(p.e)),
                ("P", num(p.p)),
                ("dPdc", num(p.dpdc)),
                ("d2Pdc2", num(p.d2pdc2)),
                ("verdict", p.verdict.name().into()),
            ]),
            Err(e) => obj([("error", e.to_string().into())]),
        },
        _ => Value::Null,
    };
    let r = obj([
        ("command", "classify".into()),
        ("model", model_json(&m)),
        ("c", num(c)),
        ("status", status),
        ("xi_c", opt(v.xi_c)),
        ("further_roots", v.further_roots.into()),
        ("diagnostic", v.diagnostic.map_or(Value::Null, Value::from)),
        ("branch", branch),
    ]);
    ctx.out.write("classify.json", &to_text(&r))?;
    Ok(r)
}

/// Profile on `points` nodes over `[−L, L]`, `L` defaulting to the automatic half-length.
fn sized_profile(m: &NonlinearityModel, c: f64, points: usize, half_length: Option<f64>) -> Result<WaveProfile, Failure> {
    let l = half_length.or_else(|| auto_half_length(m, c)).unwrap_or(30.0);
    Ok(solve_profile(m, c, GridSpec::points(points).with_half_length(l))?)
}

fn spectrum_json(s: &SpectrumReport) -> Value {
    let mode = s.mode.as_ref().map_or(Value::Null, |md| {
        obj([
            ("gamma0", num(md.gamma0)),
            ("lambda", nums(&[md.lambda.0, md.lambda.1])),
            ("residual", num(md.residual)),
            ("rejected", md.rejected.into()),
        ])
    });
    obj([
        ("c", num(s.c)),
        ("n", s.n.into()),
        ("half_length", num(s.half_length)),
        ("gamma0", opt(s.gamma0)),
        ("n_neg_L", s.n_neg_l.into()),
        ("n_neg_Mdag", s.n_neg_mdag.into()),
        ("continuum_edge", num(s.continuum_edge)),
        ("mdag_kernel_residual", num(s.mdag_kernel_residual)),
        ("translation_residual", num(s.translation_residual)),
        ("max_real_part", num(s.max_real_part)),
        ("mode", mode),
    ])
}

pub fn spectrum(ctx: &Context) -> Outcome {
    let m = model(ctx.cfg)?;
    let c = ctx.cfg.num("spectrum", "c").ok_or_else(|| missing("spectrum", "c"))?;
    let n = ctx.cfg.int("spectrum", "points").unwrap_or(1024) as usize;
    let p = sized_profile(&m, c, n, ctx.cfg.num("spectrum", "half_length"))?;
    let ops = build_operators(&m, &p, n)?;
    let s = report(&ops)?;
    if ctx.cfg.flag("spectrum", "mode_csv").unwrap_or(false) {
        if let Some(md) = &s.mode {
            let w = nls_mode_field(&p, &md.zeta, &md.upsilon)?;
            let mut csv = Csv::new(&["x", "zeta", "upsilon", "re_w", "im_w"]);
            for i in 0..p.len() {
                csv.row(&[Cell::Num(p.x[i]), Cell::Num(md.zeta[i]), Cell::Num(md.upsilon[i]), Cell::Num(w[i].re), Cell::Num(w[i].im)]);
            }
            ctx.out.write("mode.csv", &csv.into_string())?;
        }
    }
    let mut r = obj([("command", "spectrum".into()), ("model", model_json(&m))]);
    if let (Value::Object(a), Value::Object(b)) = (&mut r, spectrum_json(&s)) {
        a.extend(b);
    }
    ctx.out.write("spectrum.json", &to_text(&r))?;
    Ok(r)
}

pub fn evolve_cmd(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let m = model(cfg)?;
    let c = cfg.num("evolve", "c").ok_or_else(|| missing("evolve", "c"))?;
    let n = cfg.int("evolve", "points").unwrap_or(1024) as usize;
    let p = sized_profile(&m, c, n, cfg.num("evolve", "half_length"))?;
    let delta = cfg.num("evolve", "delta").unwrap_or(1e-3);
    let lab = match cfg.str("evolve", "frame").unwrap_or("co_moving") {
        "co_moving" => false,
        "lab" => true,
        f => return Err(invalid("evolve", "frame", format!("expected co_moving or lab, found {f:?}"))),
    };
    let distances = cfg.flag("evolve", "distances").unwrap_or(!lab);
    if lab && distances {
        return Err(invalid("evolve", "distances", "distances are measured in the co-moving frame"));
    }
    let initial = cfg.str("evolve", "initial").unwrap_or("random");
    let mut state = FieldState::from_profile(&p);
    let mut w = None;
    let mut gamma0 = None;
    match initial {
        "exact" => {}
        "random" => state = state.perturbed(&random_perturbation(&p.x, 1.0, ctx.seed, 0), delta),
        "mode" => {
            let ops = build_operators(&m, &p, n)?;
            let s = report(&ops)?;
            let md = s.mode.ok_or_else(|| Error::Spectrum(format!("no unstable eigenvalue at c = {c}")))?;
            let v = nls_mode_field(&p, &md.zeta, &md.upsilon)?;
            state = state.perturbed(&v, delta);
            gamma0 = Some(md.gamma0);
            w = Some(v);
        }
        f => return Err(invalid("evolve", "initial", format!("expected exact, mode or random, found {f:?}"))),
    }
    if lab {
        state.c_frame = 0.0;
    }
    let run_cfg = RunConfig {
        t_final: cfg.num("evolve", "t_final").unwrap_or(50.0),
        dt: cfg.num("evolve", "dt").unwrap_or(0.01),
        output_every: cfg.num("evolve", "output_every").unwrap_or(1.0),
        clamp_fraction: cfg.num("evolve", "clamp_fraction").unwrap_or(0.02),
        distances,
        snapshots: cfg.flag("evolve", "snapshots").unwrap_or(false),
        ..Default::default()
    };
    let wave = if distances { Some(WaveRef::new(&m, c, p.half_length)?) } else { None };
    let run = evolve(&m, &state, &run_cfg, &Observers { wave: wave.as_ref(), mode: w.as_deref() })?;
    let d = &run.diagnostics;

    let mut csv = Csv::new(&["t", "E", "P_untwisted", "d_hy", "d_Z", "mode_amp", "boundary_dev"]);
    for s in &d.samples {
        csv.row(&[
            Cell::Num(s.t),
            Cell::Num(s.energy),
            Cell::Opt(s.momentum),
            Cell::Opt(s.d_hy),
            Cell::Opt(s.d_z),
            Cell::Opt(s.mode_amp),
            Cell::Num(s.boundary_dev),
        ]);
    }
    ctx.out.write("diagnostics.csv", &csv.into_string())?;
    if run_cfg.snapshots {
        let mut csv = Csv::new(&["t", "x", "re", "im"]);
        for s in &run.snapshots {
            for (x, z) in s.x.iter().zip(&s.psi) {
                csv.row(&[Cell::Num(s.t), Cell::Num(*x), Cell::Num(z.re), Cell::Num(z.im)]);
            }
        }
        ctx.out.write("snapshots.csv", &csv.into_string())?;
    }
    let fit = gamma0.map(|_| {
        let t: Vec<f64> = d.samples.iter().map(|s| s.t).collect();
        let a: Vec<f64> = d.samples.iter().map(|s| s.mode_amp.unwrap_or(f64::NAN)).collect();
        growth_rate(&t, &a, None, 1.0)
    });
    let growth = match fit {
        None => Value::Null,
        Some(Ok(g)) => obj([
            ("gamma0", opt(gamma0)),
            ("gamma_fit", num(g.gamma)),
            ("half_width", num(g.half_width)),
            ("t_start", num(g.t_start)),
            ("t_end", num(g.t_end)),
        ]),
        Some(Err(e)) => obj([("gamma0", opt(gamma0)), ("error", e.to_string().into())]),
    };
    let r = obj([
        ("command", "evolve".into()),
        ("model", model_json(&m)),
        ("c", num(c)),
        ("initial", initial.into()),
        ("frame", if lab { "lab" } else { "co_moving" }.into()),
        ("delta", num(delta)),
        ("seed", ctx.seed.into()),
        ("points", p.len().into()),
        ("half_length", num(p.half_length)),
        ("energy_drift", num(d.energy_drift)),
        ("momentum_drift", opt(d.momentum_drift)),
        ("steps", d.steps.into()),
        ("max_iterations", d.max_iterations.into()),
        ("valid", d.valid.into()),
        ("warnings", Value::Array(d.warnings.iter().map(|w| Value::from(w.as_str())).collect())),
        ("growth", growth),
    ]);
    ctx.out.write("evolve.json", &to_text(&r))?;
    Ok(r)
}

pub fn distances(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let m = model(cfg)?;
    let c = cfg.num("distances", "c").unwrap_or(0.5 * m.c_s);
    let draws = cfg.int("distances", "draws").unwrap_or(100);
    let amp = cfg.num("distances", "amplitude").unwrap_or(0.02);
    let p = solve_profile(&m, c, grid(cfg)?)?;
    let u = p.sample_complex();
    let mut csv = Csv::new(&["draw", "d_Z", "d_hy", "ratio"]);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..draws {
        let psi: Vec<_> = u.iter().zip(random_perturbation(&p.x, amp, ctx.seed, k)).map(|(a, b)| a + b).collect();
        let dz = d_z(&p.x, &psi, &u);
        let dh = d_hy(&p.x, &psi, &u)?;
        lo = lo.min(dh / dz);
        hi = hi.max(dh / dz);
        csv.row(&[Cell::Int(k), Cell::Num(dz), Cell::Num(dh), Cell::Num(dh / dz)]);
    }
    ctx.out.write("distances.csv", &csv.into_string())?;
    let pairs = cfg.list("distances", "phase_pairs").unwrap_or(&[100.0, 1000.0]);
    let mut table = vec![];
    for &nf in pairs {
        if !(nf >= 1.0 && nf.fract() == 0.0) {
            return Err(invalid("distances", "phase_pairs", format!("{nf} is not a positive integer")));
        }
        let (x, a, b) = phase_pair(nf as usize, 32, 10.0);
        table.push(obj([
            ("n", (nf as u64).into()),
            ("d_hy", num(d_hy(&x, &a, &b)?)),
            ("d_Z", num(d_z(&x, &a, &b))),
            ("sqrt_2pi_over_n", num((2.0 * std::f64::consts::PI / nf).sqrt())),
        ]));
    }
    let r = obj([
        ("command", "distances".into()),
        ("model", model_json(&m)),
        ("c", num(c)),
        ("draws", draws.into()),
        ("amplitude", num(amp)),
        ("seed", ctx.seed.into()),
        ("ratio_min", if draws > 0 { num(lo) } else { Value::Null }),
        ("ratio_max", if draws > 0 { num(hi) } else { Value::Null }),
        ("phase_pairs", Value::Array(table)),
    ]);
    ctx.out.write("distances.json", &to_text(&r))?;
    Ok(r)
}
