//! Equations of motion for the rapidity distribution `ρ(k, t)`.
//!
//! Two flows are provided:
//!
//! * the t-GGE rate equation of the spin chain, written with circular Hilbert
//!   transforms so that one right-hand-side evaluation costs four FFTs;
//! * the diagonal free-fermion decay `dρ/dt = -2κ(1 + cos(k + φ)) ρ`.
//!
//! Both are integrated with the adaptive Dormand–Prince stepper, landing exactly
//! on each requested checkpoint.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Integrator, StepStats, Tolerance};
use crate::spectral::{FourierGrid, PeriodicFunction, SpectralScratch};

/// Physical constants: exchange `j`, loss rate `kappa`, non-reciprocity angle
/// `phi` and initial-state angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub kappa: f64,
    pub phi: f64,
    pub theta: f64,
}

impl ModelParams {
    pub fn new(j: f64, kappa: f64, phi: f64, theta: f64) -> Result<Self> {
        let p = Self { j, kappa, phi, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.j.is_finite() {
            return Err(Error::Domain {
                name: "J",
                value: self.j,
                constraint: "J finite",
            });
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Domain {
                name: "kappa",
                value: self.kappa,
                constraint: "kappa > 0",
            });
        }
        if !(self.phi > -PI && self.phi <= PI) {
            return Err(Error::Domain {
                name: "phi",
                value: self.phi,
                constraint: "phi in (-pi, pi]",
            });
        }
        check_theta(self.theta)
    }

    /// Slow mode `k* = π - φ`, reduced to `[0, 2π)`.
    pub fn slow_mode(&self) -> f64 {
        (PI - self.phi).rem_euclid(2.0 * PI)
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if (0.0..FRAC_PI_2).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "theta",
            value: theta,
            constraint: "theta in [0, pi/2)",
        })
    }
}

/// `ρ(k)` on a grid at elapsed physical time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct RapidityState {
    grid: FourierGrid,
    rho: Vec<f64>,
    time: f64,
}

impl RapidityState {
    pub fn new(grid: &FourierGrid, rho: Vec<f64>, time: f64) -> Result<Self> {
        let f = PeriodicFunction::new(grid, rho)?;
        Ok(Self {
            grid: grid.clone(),
            rho: f.into_values(),
            time,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn as_function(&self) -> PeriodicFunction {
        PeriodicFunction::from_parts_unchecked(&self.grid, self.rho.clone())
    }

    /// Cyclic shift by `s` nodes.
    pub fn shifted(&self, s: isize) -> Self {
        let values = self.as_function().shifted(s).into_values();
        Self {
            grid: self.grid.clone(),
            rho: values,
            time: self.time,
        }
    }

    /// Periodic linear interpolation at an arbitrary momentum.
    pub fn sample_at(&self, k: f64) -> f64 {
        let m = self.rho.len();
        let x = k.rem_euclid(2.0 * PI) / self.grid.spacing();
        let i = (x.floor() as usize).min(m - 1);
        let w = x - i as f64;
        (1.0 - w) * self.rho[i] + w * self.rho[(i + 1) % m]
    }
}

/// `ρ₀(k)` for the product state at angle `θ`.
pub fn initial_rapidity_at(theta: f64, k: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let c2 = (2.0 * theta).cos();
    let c = theta.cos();
    2.0 * c.powi(4) * (1.0 + k.cos()) / (1.0 + 2.0 * k.cos() * c2 + c2 * c2)
}

pub fn initial_rapidity(theta: f64, grid: &FourierGrid) -> Result<RapidityState> {
    check_theta(theta)?;
    let rho = grid
        .nodes()
        .into_iter()
        .map(|k| initial_rapidity_at(theta, k))
        .collect();
    Ok(RapidityState {
        grid: grid.clone(),
        rho,
        time: 0.0,
    })
}

/// Which flow to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateEquation {
    /// Spin-chain t-GGE equation.
    Tgge,
    /// Non-interacting fermions with two-site losses.
    FreeFermion,
}

/// Precomputed `cos(k+φ)`, `sin(k+φ)` and FFT buffers for repeated
/// right-hand-side evaluation on one grid.
#[derive(Debug, Clone)]
pub struct RateKernel {
    grid: FourierGrid,
    kappa: f64,
    phase: Vec<Complex64>,
    scratch: SpectralScratch,
}

impl RateKernel {
    pub fn new(grid: &FourierGrid, params: &ModelParams) -> Self {
        let phase = grid
            .nodes()
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, k + params.phi))
            .collect();
        Self {
            grid: grid.clone(),
            kappa: params.kappa,
            phase,
            scratch: SpectralScratch::new(grid),
        }
    }

    pub fn eval(&mut self, equation: RateEquation, rho: &[f64], out: &mut [f64]) {
        match equation {
            RateEquation::Tgge => self.tgge(rho, out),
            RateEquation::FreeFermion => self.free_fermion(rho, out),
        }
    }

    pub fn free_fermion(&self, rho: &[f64], out: &mut [f64]) {
        let rate = -2.0 * self.kappa;
        for ((o, &r), z) in out.iter_mut().zip(rho).zip(&self.phase) {
            *o = rate * (1.0 + z.re) * r;
        }
    }

    /// `dρ/dt = -2κ [ (ρ + ρ_c)(1 - ρ) + n (n + 2H[ρ]' + H[ρ_s] + ⟨ρ_c⟩)
    ///              + H[ρ] (H[ρ] + H[ρ_c] - ⟨ρ_s⟩) + 2 H[ρ]' ⟨ρ_c⟩ ]`
    /// with `ρ_c = ρ cos(k+φ)`, `ρ_s = ρ sin(k+φ)` and `⟨·⟩` the mean.
    pub fn tgge(&mut self, rho: &[f64], out: &mut [f64]) {
        let n = self.scratch.hilbert_and_deriv(&self.grid, rho);
        for ((b, &r), z) in self.scratch.b.iter_mut().zip(rho).zip(&self.phase) {
            *b = z * r;
        }
        let trig_mean = self.scratch.hilbert_complex(&self.grid);
        let (mean_c, mean_s) = (trig_mean.re, trig_mean.im);
        let rate = -2.0 * self.kappa;
        let a = &self.scratch.a;
        let b = &self.scratch.b;
        for m in 0..rho.len() {
            let r = rho[m];
            let rc = r * self.phase[m].re;
            let (h, hd) = (a[m].re, a[m].im);
            let (h_c, h_s) = (b[m].re, b[m].im);
            let value =
                (r + rc) * (1.0 - r) + n * (n + 2.0 * hd + h_s + mean_c) + h * (h + h_c - mean_s) + 2.0 * hd * mean_c;
            out[m] = rate * value;
        }
    }
}

pub fn tgge_rhs(state: &RapidityState, params: &ModelParams) -> PeriodicFunction {
    let mut kernel = RateKernel::new(state.grid(), params);
    let mut out = vec![0.0; state.grid().len()];
    kernel.tgge(state.rho(), &mut out);
    PeriodicFunction::from_parts_unchecked(state.grid(), out)
}

pub fn free_fermion_rhs(state: &RapidityState, params: &ModelParams) -> PeriodicFunction {
    let kernel = RateKernel::new(state.grid(), params);
    let mut out = vec![0.0; state.grid().len()];
    kernel.free_fermion(state.rho(), &mut out);
    PeriodicFunction::from_parts_unchecked(state.grid(), out)
}

/// Closed-form free-fermion state `ρ₀(k) e^{-2κ(1 + cos(φ+k)) t}`.
pub fn free_fermion_exact(theta: f64, phi: f64, kappa: f64, t: f64, grid: &FourierGrid) -> Result<RapidityState> {
    if !(t >= 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            constraint: "t >= 0",
        });
    }
    let mut state = initial_rapidity(theta, grid)?;
    for (r, k) in state.rho.iter_mut().zip(grid.nodes()) {
        *r *= (-2.0 * kappa * (1.0 + (phi + k).cos()) * t).exp();
    }
    state.time = t;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step, physical time units.
    pub dt_init: f64,
    /// Output times (physical), strictly increasing.
    pub checkpoints: Vec<f64>,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn new(checkpoints: Vec<f64>) -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            dt_init: 1e-4,
            checkpoints,
            max_steps: 5_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.dt_init > 0.0) {
            return Err(Error::InvalidConfig("dt_init must be positive".into()));
        }
        if self.checkpoints.first().is_some_and(|&t| !(t >= 0.0)) {
            return Err(Error::InvalidConfig("first checkpoint must be >= 0".into()));
        }
        if self.checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `count` checkpoints log-spaced in `κt` over `[kt_lo, kt_hi]`, returned as
/// physical times.
pub fn log_checkpoints(kt_lo: f64, kt_hi: f64, count: usize, kappa: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![kt_lo / kappa],
        _ => {
            let (a, b) = (kt_lo.ln(), kt_hi.ln());
            (0..count)
                .map(|i| {
                    let kt = if i == 0 {
                        kt_lo
                    } else if i + 1 == count {
                        kt_hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    };
                    kt / kappa
                })
                .collect()
        }
    }
}

/// Checkpoint states plus diagnostics of an [`evolve`] call.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub states: Vec<RapidityState>,
    /// Most negative `ρ` seen at any checkpoint before clamping (0 if none).
    pub worst_undershoot: f64,
    /// Largest `ρ - 1` seen at any checkpoint (0 if none); not clamped.
    pub worst_overshoot: f64,
    pub stats: StepStats,
}

/// Integrates `equation` from `initial` and returns the states at each
/// checkpoint. Negative samples are clamped to zero in the returned states
/// only; the integration itself never sees clamped values.
pub fn evolve(
    initial: &RapidityState,
    equation: RateEquation,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Evolution> {
    params.validate()?;
    cfg.validate()?;
    if cfg.checkpoints.first().is_some_and(|&t| t < initial.time) {
        return Err(Error::InvalidConfig(format!(
            "first checkpoint {} precedes initial time {}",
            cfg.checkpoints[0], initial.time
        )));
    }
    let grid = initial.grid().clone();
    let mut kernel = RateKernel::new(&grid, params);
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| kernel.eval(equation, y, dy);
    let tol = Tolerance {
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
    };
    let mut integrator = Integrator::new(grid.len(), tol, cfg.dt_init, cfg.max_steps);
    let mut t = initial.time;
    let mut y = initial.rho.clone();
    let mut states = Vec::with_capacity(cfg.checkpoints.len());
    let mut worst_undershoot = 0.0_f64;
    let mut worst_overshoot = 0.0_f64;
    for &tc in &cfg.checkpoints {
        integrator.advance_to(&mut rhs, &mut t, &mut y, tc, |_, _| Ok(false))?;
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst_undershoot = worst_undershoot.min(min);
        worst_overshoot = worst_overshoot.max(max - 1.0);
        states.push(RapidityState {
            grid: grid.clone(),
            rho: y.iter().map(|&r| r.max(0.0)).collect(),
            time: tc,
        });
    }
    Ok(Evolution {
        states,
        worst_undershoot,
        worst_overshoot,
        stats: integrator.stats(),
    })
}
