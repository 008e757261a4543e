use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use proptest::prelude::*;
use tgge::observables::density;
use tgge::oracles::initial_corr;
use tgge::{
    evolve, free_fermion_exact, free_fermion_rhs, initial_rapidity, mean, tgge_rhs, FourierGrid, IntegratorConfig,
    ModelParams, PeriodicFunction, RapidityState, RateEquation,
};

fn wrap_phi(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Band-limited `ρ = 1/2 + Σ_{n≤8} (a_n cos nk + b_n sin nk)` with total
/// harmonic amplitude ≤ 1/2, so `ρ ∈ [0, 1]`.
fn band_limited() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=8).prop_map(|mut c| {
        let total: f64 = c.iter().map(|(a, b)| a.abs() + b.abs()).sum();
        let scale = 0.5 / total.max(1e-12);
        for (a, b) in &mut c {
            *a *= scale;
            *b *= scale;
        }
        c
    })
}

fn state(g: &FourierGrid, coeffs: &[(f64, f64)]) -> RapidityState {
    let f = PeriodicFunction::from_fn(g, |k| {
        0.5 + coeffs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let n = (i + 1) as f64;
                a * (n * k).cos() + b * (n * k).sin()
            })
            .sum::<f64>()
    })
    .unwrap();
    RapidityState::new(g, f.into_values(), 0.0).unwrap()
}

fn weighted_loss(s: &RapidityState, phi: f64) -> f64 {
    let g = s.grid();
    s.rho()
        .iter()
        .enumerate()
        .map(|(m, r)| (1.0 + (g.node(m) + phi).cos()) * r)
        .sum::<f64>()
        / g.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sum_rule(coeffs in band_limited(), phi in -3.1..3.1f64, kappa in 0.01..2.0f64) {
        let g = FourierGrid::new(64).unwrap();
        let s = state(&g, &coeffs);
        let p = ModelParams::new(1.0, kappa, phi, 0.0).unwrap();
        let lhs = mean(&tgge_rhs(&s, &p));
        prop_assert!((lhs + 2.0 * kappa * weighted_loss(&s, phi)).abs() <= 1e-8 * kappa);
    }

    #[test]
    fn shift_covariance(coeffs in band_limited(), phi in -3.1..3.1f64, shift in -32isize..32) {
        let g = FourierGrid::new(64).unwrap();
        let s = state(&g, &coeffs);
        let p = ModelParams::new(1.0, 0.7, phi, 0.0).unwrap();
        let moved = ModelParams { phi: wrap_phi(phi - shift as f64 * g.spacing()), ..p };
        let a = tgge_rhs(&s.shifted(shift), &moved);
        let b = tgge_rhs(&s, &p).shifted(shift);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_symmetry(coeffs in band_limited(), phi in -3.1..3.1f64) {
        // ρ(k) → ρ(-k) together with φ → -φ maps the rate to its mirror image.
        let m = 64;
        let g = FourierGrid::new(m).unwrap();
        let s = state(&g, &coeffs);
        let mirror = |v: &[f64]| (0..m).map(|i| v[(m - i) % m]).collect::<Vec<f64>>();
        let reflected = RapidityState::new(&g, mirror(s.rho()), 0.0).unwrap();
        let p = ModelParams::new(1.0, 0.4, phi, 0.0).unwrap();
        let q = ModelParams { phi: wrap_phi(-phi), ..p };
        let a = tgge_rhs(&reflected, &q);
        let b = mirror(tgge_rhs(&s, &p).values());
        for (x, y) in a.values().iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dilute_limit_is_free_fermion(coeffs in band_limited(), phi in -3.1..3.1f64) {
        let g = FourierGrid::new(64).unwrap();
        let s = state(&g, &coeffs);
        let p = ModelParams::new(1.0, 0.9, phi, 0.0).unwrap();
        let eps = 1e-6;
        let small = RapidityState::new(&g, s.rho().iter().map(|r| eps * r).collect(), 0.0).unwrap();
        let t = tgge_rhs(&small, &p);
        let f = free_fermion_rhs(&s, &p);
        for (x, y) in t.values().iter().zip(f.values()) {
            prop_assert!((x / eps - y).abs() < 20.0 * eps);
        }
    }

    #[test]
    fn constant_reduction(c in 0.0..=1.0f64, phi in -3.1..3.1f64) {
        let g = FourierGrid::new(32).unwrap();
        let s = RapidityState::new(&g, vec![c; 32], 0.0).unwrap();
        let p = ModelParams::new(1.0, 0.3, phi, 0.0).unwrap();
        let r = tgge_rhs(&s, &p);
        for (i, v) in r.values().iter().enumerate() {
            let want = -2.0 * 0.3 * c * (1.0 + (1.0 - 2.0 * c) * (g.node(i) + phi).cos());
            prop_assert!((v - want).abs() < 1e-12);
        }
    }
}

#[test]
fn evolution_empties_monotonically() {
    let g = FourierGrid::new(256).unwrap();
    for (theta, phi) in [(0.0, -FRAC_PI_2), (0.3, 0.0), (FRAC_PI_4, 1.0)] {
        let p = ModelParams::new(1.0, 0.5, phi, theta).unwrap();
        let cfg = IntegratorConfig::new((1..=20).map(|i| 0.5 * i as f64).collect());
        let run = evolve(&initial_rapidity(theta, &g).unwrap(), RateEquation::Tgge, &p, &cfg).unwrap();
        let ns: Vec<f64> = run.states.iter().map(density).collect();
        assert!(ns.windows(2).all(|w| w[1] < w[0]), "{ns:?}");
        assert!(run.worst_undershoot > -1e-8 && run.worst_overshoot < 1e-8);
    }
}

#[test]
fn free_fermion_evolution_matches_closed_form() {
    let g = FourierGrid::new(512).unwrap();
    for (theta, phi) in [(0.0, 0.0), (FRAC_PI_4, -FRAC_PI_2), (0.5, 0.8)] {
        let p = ModelParams::new(1.0, 0.2, phi, theta).unwrap();
        let cfg = IntegratorConfig::new(vec![1.0, 10.0, 50.0]);
        let run = evolve(
            &initial_rapidity(theta, &g).unwrap(),
            RateEquation::FreeFermion,
            &p,
            &cfg,
        )
        .unwrap();
        for s in &run.states {
            let exact = free_fermion_exact(theta, phi, p.kappa, s.time(), &g).unwrap();
            for (a, b) in s.rho().iter().zip(exact.rho()) {
                assert!((a - b).abs() <= 10.0 * cfg.rel_tol * b.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn short_time_expansion() {
    // n(t) = n₀ - 2κt ⟨(1 + cos(k+φ)) ρ₀⟩ + O(t²).
    let g = FourierGrid::new(256).unwrap();
    let theta = 0.4;
    let p = ModelParams::new(1.0, 0.3, -0.7, theta).unwrap();
    let rho0 = initial_rapidity(theta, &g).unwrap();
    let slope = -2.0 * p.kappa * weighted_loss(&rho0, p.phi);
    let mut errs = Vec::new();
    for t in [1e-2, 5e-3] {
        let run = evolve(&rho0, RateEquation::Tgge, &p, &IntegratorConfig::new(vec![t])).unwrap();
        errs.push((density(&run.states[0]) - density(&rho0) - slope * t).abs());
    }
    // Quadratic remainder: halving t divides the error by about four.
    assert!(errs[0] < 1e-4);
    let ratio = errs[0] / errs[1];
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn initial_state_fourier_coefficients() {
    // ρ₀(k) = Σ_d e^{-ikd} ⟨c_0† c_d⟩.
    let g = FourierGrid::new(1024).unwrap();
    for theta in [0.2, 0.4, FRAC_PI_4, 1.2] {
        let rho0 = initial_rapidity(theta, &g).unwrap();
        for d in 0..12i64 {
            let coeff = rho0
                .rho()
                .iter()
                .enumerate()
                .map(|(m, r)| r * (g.node(m) * d as f64).cos())
                .sum::<f64>()
                / g.len() as f64;
            assert!((coeff - initial_corr(theta, d)).abs() < 1e-12, "theta {theta} d {d}");
        }
    }
}

#[test]
fn all_up_density_independent_of_phi() {
    // For |⇑⟩ the initial distribution is flat, so φ only shifts ρ in k.
    let g = FourierGrid::new(256).unwrap();
    let cfg = IntegratorConfig::new(vec![2.0, 20.0]);
    let n_of = |phi: f64| -> Vec<f64> {
        let p = ModelParams::new(1.0, 0.1, phi, 0.0).unwrap();
        evolve(&initial_rapidity(0.0, &g).unwrap(), RateEquation::Tgge, &p, &cfg)
            .unwrap()
            .states
            .iter()
            .map(density)
            .collect()
    };
    let (a, b) = (n_of(0.0), n_of(-FRAC_PI_2));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
}
