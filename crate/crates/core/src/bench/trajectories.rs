//! Quantum-jump unraveling with a pre-drawn squared-norm threshold: the state
//! evolves under `H_eff` until `‖ψ‖²` falls to the threshold (located by
//! bisection on the dense output), then jumps through channel `j` with
//! probability `∝ ‖L_j ψ‖²`.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlators::{pure_state_correlations, SectorOccupations};
use super::operators::{build_operators, initial_spin_state, SectorBasis, SpinOperators};
use super::SpinChainConfig;
use crate::error::{Error, Result};
use crate::ode::{DormandPrince, Tolerance};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NEG_I: Complex64 = Complex64::new(0.0, -1.0);
/// Trajectories evaluated in parallel before their results are folded in.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
}

/// Stored trajectories. `states[c][i]` is trajectory `i` at checkpoint `c`,
/// normalized, in bit-pattern order (bit `j` set = site `j + 1` up).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub sites: usize,
    pub checkpoints: Vec<f64>,
    pub streams: Vec<u64>,
    pub states: Vec<Vec<Vec<Complex64>>>,
    pub jumps: Vec<Vec<JumpEvent>>,
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Inclusive range of particle numbers carrying amplitude.
fn occupied_sectors(basis: &SectorBasis, psi: &[Complex64]) -> (usize, usize) {
    let ns: Vec<usize> = (0..=basis.sites())
        .filter(|&n| basis.sector(n).any(|i| psi[i] != ZERO))
        .collect();
    (ns[0], ns[ns.len() - 1])
}

struct Outcome<S> {
    samples: Vec<S>,
    jumps: Vec<JumpEvent>,
    steps: usize,
}

fn run_one<S, F>(ops: &SpinOperators, cfg: &SpinChainConfig, stream: u64, sample: &F) -> Result<Outcome<S>>
where
    F: Fn(&SectorBasis, Range<usize>, &[Complex64]) -> S,
{
    let basis = &ops.basis;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let times = cfg.physical_times();
    let control = cfg.control;
    let tol = Tolerance {
        rel: control.rel_tol,
        abs: control.abs_tol,
    };

    let full = initial_spin_state(basis, cfg.params.theta);
    let (mut n_lo, mut n_hi) = occupied_sectors(basis, &full);
    let mut range = basis.sectors(n_lo, n_hi);
    let mut y = full[range.clone()].to_vec();
    let mut stepper = DormandPrince::new(y.len(), tol);
    let mut h = 0.1 / (cfg.params.j.abs() + cfg.params.kappa * basis.sites() as f64);
    let mut t = 0.0_f64;
    let mut threshold: f64 = rng.random();
    let mut out = Outcome {
        samples: Vec::with_capacity(times.len()),
        jumps: Vec::new(),
        steps: 0,
    };
    let mut next = 0;
    let mut scratch = vec![ZERO; basis.dim()];
    let mut jumped = vec![ZERO; basis.dim()];
    let mut dense = vec![ZERO; y.len()];

    loop {
        while next < times.len() && times[next] <= t {
            let scale = norm_sqr(&y).sqrt().recip();
            let normalized: Vec<Complex64> = y.iter().map(|a| a * scale).collect();
            out.samples.push(sample(basis, range.clone(), &normalized));
            next += 1;
        }
        if next == times.len() {
            return Ok(out);
        }
        if out.steps >= control.max_steps {
            return Err(Error::StepBudget {
                budget: control.max_steps,
                time: t,
            });
        }
        let target = times[next];
        let clipped = h >= target - t;
        let step = if clipped { target - t } else { h };
        if step <= 1e-14 * t.max(1.0) {
            return Err(Error::StepUnderflow { time: t });
        }
        let block = range.clone();
        let mut rhs = |_: f64, x: &[Complex64], dx: &mut [Complex64]| {
            ops.effective.matvec_block(block.clone(), x, dx);
            for v in dx.iter_mut() {
                *v *= NEG_I;
            }
        };
        let err = stepper.attempt(&mut rhs, t, &y, step);
        out.steps += 1;
        if !err.is_finite() {
            return Err(Error::NonFiniteState { time: t + step });
        }
        if err > 1.0 {
            h = stepper.reject(step, err);
            continue;
        }
        let before = norm_sqr(&y);
        let proposal = stepper.accept(&mut y, step, err);
        if !clipped || proposal < h {
            h = proposal;
        }
        let after = norm_sqr(&y);
        if after - before > 1e-6 {
            return Err(Error::NormDrift {
                drift: after - before,
                time: t + step,
            });
        }
        if after > threshold {
            t = if clipped { target } else { t + step };
            continue;
        }

        // Threshold crossed inside the step: bisect the continuous extension.
        dense.resize(y.len(), ZERO);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut theta = 1.0;
        let mut value = after;
        while (value - threshold).abs() > control.norm_tol && (hi - lo) * step > 1e-15 * t.max(1.0) {
            theta = 0.5 * (lo + hi);
            stepper.dense(theta, &mut dense);
            value = norm_sqr(&dense);
            if value > threshold {
                lo = theta;
            } else {
                hi = theta;
            }
        }
        if theta < 1.0 {
            y.copy_from_slice(&dense);
        }
        t += theta * step;

        scratch.iter_mut().for_each(|v| *v = ZERO);
        scratch[range.clone()].copy_from_slice(&y);
        let weights: Vec<f64> = ops
            .jumps
            .iter()
            .map(|l| {
                l.matvec(&scratch, &mut jumped);
                norm_sqr(&jumped)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NonFiniteState { time: t });
        }
        let mut pick = rng.random::<f64>() * total;
        let site = weights
            .iter()
            .position(|w| {
                pick -= w;
                pick < 0.0
            })
            .unwrap_or(weights.len() - 1);
        ops.jumps[site].matvec(&scratch, &mut jumped);
        let scale = weights[site].sqrt().recip();
        out.jumps.push(JumpEvent { time: t, site });

        n_lo = n_lo.saturating_sub(1);
        n_hi -= 1;
        range = basis.sectors(n_lo, n_hi);
        y = jumped[range.clone()].iter().map(|a| a * scale).collect();
        stepper = DormandPrince::new(y.len(), tol);
        threshold = rng.random();
    }
}

/// Runs all trajectories in chunks, folding each chunk into `sink` in
/// trajectory order so results do not depend on the thread count.
fn drive<S, F, G>(cfg: &SpinChainConfig, sample: F, mut sink: G) -> Result<()>
where
    S: Send,
    F: Fn(&SectorBasis, Range<usize>, &[Complex64]) -> S + Sync,
    G: FnMut(u64, Outcome<S>),
{
    cfg.validate()?;
    let p = &cfg.params;
    let ops = build_operators(cfg.sites, p.j, p.kappa, p.phi)?;
    let n = cfg.n_traj as u64;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK as u64).min(n);
        let chunk: Vec<Result<Outcome<S>>> = (start..end)
            .into_par_iter()
            .map(|i| run_one(&ops, cfg, i, &sample))
            .collect();
        for (i, r) in (start..end).zip(chunk) {
            sink(i, r?);
        }
        start = end;
    }
    Ok(())
}

pub fn run_trajectories(cfg: &SpinChainConfig) -> Result<TrajectoryEnsemble> {
    let mut ens = TrajectoryEnsemble {
        sites: cfg.sites,
        checkpoints: cfg.checkpoints.clone(),
        streams: Vec::with_capacity(cfg.n_traj),
        states: vec![Vec::with_capacity(cfg.n_traj); cfg.checkpoints.len()],
        jumps: Vec::with_capacity(cfg.n_traj),
    };
    drive(
        cfg,
        |basis, range, psi| {
            let mut full = vec![ZERO; basis.dim()];
            full[range].copy_from_slice(psi);
            basis.to_pattern_order(&full)
        },
        |stream, outcome| {
            ens.streams.push(stream);
            ens.jumps.push(outcome.jumps);
            for (c, s) in outcome.samples.into_iter().enumerate() {
                ens.states[c].push(s);
            }
        },
    )?;
    Ok(ens)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    /// `sqrt(E|z - mean|² / N)`.
    pub stderr: f64,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn estimate(&self, count: usize) -> Estimate {
        let n = count as f64;
        let mean = self.sum / n;
        let var = if count > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
struct ComplexMoments {
    sum: Complex64,
    sum_sq: f64,
}

impl ComplexMoments {
    fn push(&mut self, z: Complex64) {
        self.sum += z;
        self.sum_sq += z.norm_sqr();
    }

    fn estimate(&self, count: usize) -> ComplexEstimate {
        let n = count as f64;
        let mean = self.sum / n;
        let var = if count > 1 {
            ((self.sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        ComplexEstimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Ensemble means and standard errors at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStatistics {
    pub kt: f64,
    pub n: Estimate,
    pub current_over_j: Estimate,
    pub energy_over_j: Estimate,
    pub site_density: Vec<Estimate>,
    pub rho_ap: Vec<Estimate>,
    pub rho_p: Vec<Estimate>,
    pub rho_tilde: Vec<Estimate>,
    /// `⟨P₊ c†(k) c(q)⟩` on `Q_ap × Q_ap`, row-major.
    pub corr_ap: Vec<ComplexEstimate>,
    /// `⟨P₋ c†(k) c(q)⟩` on `Q_p × Q_p`, row-major.
    pub corr_p: Vec<ComplexEstimate>,
}

impl CheckpointStatistics {
    pub fn occupations(&self) -> SectorOccupations {
        SectorOccupations::new(
            self.rho_ap.len(),
            self.rho_ap.iter().map(|e| e.mean).collect(),
            self.rho_p.iter().map(|e| e.mean).collect(),
        )
    }

    /// Largest `|mean| / stderr` over `k ≠ q` in either sector; entries with
    /// zero spread and zero mean are skipped.
    pub fn max_offdiagonal_score(&self) -> f64 {
        let l = self.rho_ap.len();
        let mut worst = 0.0_f64;
        for m in [&self.corr_ap, &self.corr_p] {
            for a in 0..l {
                for b in 0..l {
                    let e = m[a * l + b];
                    if a == b || (e.stderr == 0.0 && e.mean.norm() < 1e-14) {
                        continue;
                    }
                    worst = worst.max(e.mean.norm() / e.stderr);
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatistics {
    pub sites: usize,
    pub n_traj: usize,
    pub checkpoints: Vec<CheckpointStatistics>,
    pub jump_counts: Vec<usize>,
    pub steps: usize,
}

#[derive(Clone)]
struct Sample {
    n: f64,
    current: f64,
    energy: f64,
    sites: Vec<f64>,
    corr_ap: Vec<Complex64>,
    corr_p: Vec<Complex64>,
}

#[derive(Clone)]
struct CheckpointAccumulator {
    n: Moments,
    current: Moments,
    energy: Moments,
    sites: Vec<Moments>,
    rho_ap: Vec<Moments>,
    rho_p: Vec<Moments>,
    rho_tilde: Vec<Moments>,
    corr_ap: Vec<ComplexMoments>,
    corr_p: Vec<ComplexMoments>,
}

impl CheckpointAccumulator {
    fn new(l: usize) -> Self {
        let cm = ComplexMoments { sum: ZERO, sum_sq: 0.0 };
        Self {
            n: Moments::default(),
            current: Moments::default(),
            energy: Moments::default(),
            sites: vec![Moments::default(); l],
            rho_ap: vec![Moments::default(); l],
            rho_p: vec![Moments::default(); l],
            rho_tilde: vec![Moments::default(); l],
            corr_ap: vec![cm.clone(); l * l],
            corr_p: vec![cm; l * l],
        }
    }

    fn push(&mut self, s: &Sample) {
        let l = self.sites.len();
        self.n.push(s.n);
        self.current.push(s.current);
        self.energy.push(s.energy);
        for (m, v) in self.sites.iter_mut().zip(&s.sites) {
            m.push(*v);
        }
        for a in 0..l {
            let (ap, p) = (s.corr_ap[a * l + a].re, s.corr_p[a * l + a].re);
            self.rho_ap[a].push(ap);
            self.rho_p[a].push(p);
            self.rho_tilde[a].push(ap + p);
        }
        for (m, z) in self.corr_ap.iter_mut().zip(&s.corr_ap) {
            m.push(*z);
        }
        for (m, z) in self.corr_p.iter_mut().zip(&s.corr_p) {
            m.push(*z);
        }
    }

    fn finish(&self, kt: f64, count: usize) -> CheckpointStatistics {
        let est = |v: &[Moments]| v.iter().map(|m| m.estimate(count)).collect();
        CheckpointStatistics {
            kt,
            n: self.n.estimate(count),
            current_over_j: self.current.estimate(count),
            energy_over_j: self.energy.estimate(count),
            site_density: est(&self.sites),
            rho_ap: est(&self.rho_ap),
            rho_p: est(&self.rho_p),
            rho_tilde: est(&self.rho_tilde),
            corr_ap: self.corr_ap.iter().map(|m| m.estimate(count)).collect(),
            corr_p: self.corr_p.iter().map(|m| m.estimate(count)).collect(),
        }
    }
}

fn summarize(basis: &SectorBasis, range: Range<usize>, psi: &[Complex64]) -> Sample {
    let c = pure_state_correlations(basis, range, psi);
    let m = c.momentum_matrices();
    Sample {
        n: c.density(),
        current: c.current_over_j(),
        energy: c.energy_over_j(),
        sites: c.site_density(),
        corr_ap: m.ap,
        corr_p: m.p,
    }
}

/// Streaming variant of [`run_trajectories`]: accumulates densities, current,
/// energy and sector correlators without storing states.
pub fn run_trajectory_statistics(cfg: &SpinChainConfig) -> Result<EnsembleStatistics> {
    let mut acc = vec![CheckpointAccumulator::new(cfg.sites); cfg.checkpoints.len()];
    let mut jump_counts = Vec::with_capacity(cfg.n_traj);
    let mut steps = 0;
    drive(cfg, summarize, |_, outcome| {
        jump_counts.push(outcome.jumps.len());
        steps += outcome.steps;
        for (a, s) in acc.iter_mut().zip(&outcome.samples) {
            a.push(s);
        }
    })?;
    Ok(EnsembleStatistics {
        sites: cfg.sites,
        n_traj: cfg.n_traj,
        checkpoints: acc
            .iter()
            .zip(&cfg.checkpoints)
            .map(|(a, kt)| a.finish(*kt, cfg.n_traj))
            .collect(),
        jump_counts,
        steps,
    })
}

/// Ensemble-averaged sector occupations per checkpoint of a stored ensemble.
pub fn momentum_occupations(ensemble: &TrajectoryEnsemble) -> Result<Vec<SectorOccupations>> {
    let basis = SectorBasis::new(ensemble.sites);
    let l = ensemble.sites;
    ensemble
        .states
        .iter()
        .map(|states| {
            let mut ap = vec![0.0; l];
            let mut p = vec![0.0; l];
            for psi in states {
                if psi.len() != basis.dim() {
                    return Err(Error::LengthMismatch {
                        what: "trajectory state",
                        expected: basis.dim(),
                        got: psi.len(),
                    });
                }
                let occ = pure_state_correlations(&basis, 0..basis.dim(), &basis.from_pattern_order(psi))
                    .momentum_matrices()
                    .occupations();
                for a in 0..l {
                    ap[a] += occ.rho_ap[a];
                    p[a] += occ.rho_p[a];
                }
            }
            let count = states.len().max(1) as f64;
            Ok(SectorOccupations::new(
                l,
                ap.into_iter().map(|v| v / count).collect(),
                p.into_iter().map(|v| v / count).collect(),
            ))
        })
        .collect()
}
