use nlstw::dynamics::*;
use nlstw::profile::auto_half_length;
use nlstw::*;
use num_complex::Complex64;
use std::f64::consts::PI;

fn gp() -> NonlinearityModel {
    make_model(&builtin("gp").unwrap()).unwrap()
}

fn gp_wave(c: f64, n: usize) -> WaveProfile {
    let m = gp();
    let l = auto_half_length(&m, c).unwrap_or(30.0);
    solve_profile(&m, c, GridSpec::points(n).with_half_length(l)).unwrap()
}

fn add(u: &[Complex64], v: &[Complex64], s: f64) -> Vec<Complex64> {
    u.iter().zip(v).map(|(a, b)| a + b * s).collect()
}

#[test]
fn perturbed_stable_wave_conserves_energy_and_momentum() {
    let m = gp();
    let (c, l, shift) = (1.0, 90.0, 25.0);
    let p = solve_profile(&m, c, GridSpec::points(3072).with_half_length(l)).unwrap();
    let wave = WaveRef::new(&m, c, 2.0 * l).unwrap();
    let xs: Vec<f64> = p.x.iter().map(|x| x + shift).collect();
    let mut s = FieldState::from_profile(&p);
    s.c_frame = 0.0;
    s.psi = add(&wave.sample(&p.x, -shift), &random_perturbation(&xs, 1e-3, 7, 0), 1.0);
    let cfg = RunConfig { t_final: 50.0, dt: 0.01, output_every: 1.0, ..Default::default() };
    let run = evolve(&m, &s, &cfg, &Observers::default()).unwrap();
    let d = &run.diagnostics;
    assert!(d.energy_drift <= 1e-6, "energy drift {}", d.energy_drift);
    let pd = d.momentum_drift.unwrap();
    assert!(pd <= 1e-6 * 2.0 * PI, "momentum drift {pd}");
}

#[test]
fn orbital_distance_scales_with_initial_distance() {
    let m = gp();
    let p = gp_wave(1.0, 512);
    let wave = WaveRef::new(&m, 1.0, p.x[p.len() - 1]).unwrap();
    let v = random_perturbation(&p.x, 1.0, 11, 0);
    let sups: Vec<f64> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|&delta| {
            let mut s = FieldState::from_profile(&p);
            s.psi = add(&s.psi, &v, delta);
            let cfg = RunConfig { t_final: 50.0, dt: 0.02, output_every: 2.0, distances: true, ..Default::default() };
            let run = evolve(&m, &s, &cfg, &Observers { wave: Some(&wave), mode: None }).unwrap();
            run.diagnostics.samples.iter().map(|s| s.d_hy.unwrap()).fold(0.0, f64::max) / delta
        })
        .collect();
    let (lo, hi) = sups.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    assert!(hi.is_finite() && hi > 0.0);
    assert!(hi / lo <= 1.3, "sup d_hy / delta = {sups:?}");
}

#[test]
fn hydrodynamic_and_energy_distances_are_equivalent_near_a_dark_wave() {
    let p = gp_wave(1.0, 1024);
    let u = p.sample_complex();
    let ratio = |seed: u64| -> Vec<f64> {
        (0..100)
            .map(|k| {
                let psi = add(&u, &random_perturbation(&p.x, 0.02, seed, k), 1.0);
                d_hy(&p.x, &psi, &u).unwrap() / d_z(&p.x, &psi, &u)
            })
            .collect()
    };
    for seed in [1, 2] {
        let r = ratio(seed);
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
        assert!(lo >= 0.25 && hi <= 4.0, "seed {seed}: ratios in [{lo}, {hi}]");
    }
}

#[test]
fn liapounov_functional_is_minimal_at_the_wave() {
    let m = gp();
    let p = gp_wave(1.0, 1024);
    let u = p.sample_complex();
    let p_ref = momentum(&p.x, &u, 1.0).unwrap();
    let l0 = liapounov_l(&m, &p.x, &u, 1.0, 1.0, p_ref).unwrap();
    for k in 0..200 {
        let psi = add(&u, &random_perturbation(&p.x, 0.02, 3, k), 1.0);
        let l = liapounov_l(&m, &p.x, &psi, 1.0, 1.0, p_ref).unwrap();
        assert!(l - l0 >= -1e-10, "draw {k}: L - L(U) = {}", l - l0);
    }
}

fn kink(n: usize) -> WaveProfile {
    let m = gp();
    solve_profile(&m, 0.0, GridSpec::points(n).with_half_length(30.0)).unwrap()
}

#[test]
fn kink_functional_bounds_perturbed_kinks() {
    let m = gp();
    let p = kink(1024);
    let u = p.sample_complex();
    let e0 = field_energy(&m, &p.x, &u);
    for k in 0..100 {
        let psi = add(&u, &random_perturbation(&p.x, 0.05, 5, k), 1.0);
        let kv = functional_k(&m, &p.x, &psi, 1.0).unwrap();
        assert!(kv >= e0 - 1e-8, "draw {k}: K - E(U0) = {}", kv - e0);
    }
}

#[test]
fn vanishing_fields_obey_the_kink_lower_bound() {
    let m = gp();
    let p = kink(1024);
    let u = p.sample_complex();
    // 4∫_0^1 √F(s²) ds with F(ρ) = (1 − ρ)²/2
    let bound = 4.0 * 2f64.sqrt() / 3.0;
    for k in 0..50 {
        let v = random_perturbation(&p.x, 0.2, 9, k);
        let psi: Vec<Complex64> =
            u.iter().zip(&v).map(|(a, b)| a * Complex64::new(1.0 + b.re, 0.0) * Complex64::from_polar(1.0, b.im)).collect();
        let e = field_energy(&m, &p.x, &psi);
        assert!(e >= bound - 1e-6, "draw {k}: E = {e}");
    }
}

#[test]
fn stable_run_has_no_growth() {
    let m = gp();
    let p = gp_wave(1.0, 512);
    let wave = WaveRef::new(&m, 1.0, p.x[p.len() - 1]).unwrap();
    let mut s = FieldState::from_profile(&p);
    s.psi = add(&s.psi, &random_perturbation(&p.x, 1e-3, 2, 0), 1.0);
    let cfg = RunConfig { t_final: 20.0, dt: 0.02, output_every: 1.0, distances: true, ..Default::default() };
    let run = evolve(&m, &s, &cfg, &Observers { wave: Some(&wave), mode: None }).unwrap();
    let ts: Vec<f64> = run.diagnostics.samples.iter().map(|s| s.t).collect();
    let d: Vec<f64> = run.diagnostics.samples.iter().map(|s| s.d_hy.unwrap()).collect();
    assert!(matches!(growth_rate(&ts, &d, None, 1.0), Err(Error::Fit(_))));
}
