use num_complex::Complex64;

use super::correlators::{density_matrix_correlations, ChainCorrelations};
use super::operators::{build_operators, initial_spin_state, SectorBasis};
use super::SpinChainConfig;
use crate::error::{Error, Result};
use crate::observables::ObservableSeries;
use crate::ode::{Integrator, StepStats, Tolerance};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NEG_I: Complex64 = Complex64::new(0.0, -1.0);
const MAX_SITES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for LindbladTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLindbladRun {
    pub basis: SectorBasis,
    pub series: ObservableSeries,
    /// Row-major density matrices in sector order, one per checkpoint.
    pub states: Vec<Vec<Complex64>>,
    pub trace: Vec<f64>,
    pub purity: Vec<f64>,
    pub stats: StepStats,
}

impl DenseLindbladRun {
    pub fn correlations(&self, checkpoint: usize) -> ChainCorrelations {
        density_matrix_correlations(&self.basis, &self.states[checkpoint]).expect("shape fixed at construction")
    }
}

pub fn dense_lindblad(cfg: &SpinChainConfig) -> Result<DenseLindbladRun> {
    dense_lindblad_with(cfg, LindbladTolerance::default())
}

/// Integrates `dρ/dt = -i(H_eff ρ - ρ H_eff†) + κ Σ_j L_j ρ L_j†` on the full
/// density matrix, re-symmetrizing after every accepted step.
pub fn dense_lindblad_with(cfg: &SpinChainConfig, tol: LindbladTolerance) -> Result<DenseLindbladRun> {
    cfg.validate()?;
    if cfg.sites > MAX_SITES {
        return Err(Error::Domain {
            name: "L",
            value: cfg.sites as f64,
            constraint: "L <= 6 for the dense master equation",
        });
    }
    let p = cfg.params;
    let ops = build_operators(cfg.sites, p.j, p.kappa, p.phi)?;
    let dim = ops.basis.dim();
    let psi = initial_spin_state(&ops.basis, p.theta);
    let mut rho: Vec<Complex64> = (0..dim * dim).map(|i| psi[i / dim] * psi[i % dim].conj()).collect();

    let mut x = vec![ZERO; dim * dim];
    let mut rhs = |_: f64, r: &[Complex64], out: &mut [Complex64]| {
        // X = H_eff ρ; for Hermitian ρ the coherent part is -i(X - X†).
        for a in 0..dim {
            let row = &mut x[a * dim..(a + 1) * dim];
            row.iter_mut().for_each(|v| *v = ZERO);
            for (b, h) in ops.effective.row(a) {
                for (v, rb) in row.iter_mut().zip(&r[b * dim..(b + 1) * dim]) {
                    *v += h * rb;
                }
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                out[a * dim + b] = NEG_I * (x[a * dim + b] - x[b * dim + a].conj());
            }
        }
        for l in &ops.jumps {
            for a in 0..dim {
                for (c, la) in l.row(a) {
                    let la = la * p.kappa;
                    for b in 0..dim {
                        for (d, lb) in l.row(b) {
                            out[a * dim + b] += la * r[c * dim + d] * lb.conj();
                        }
                    }
                }
            }
        }
    };

    let tolerance = Tolerance {
        rel: tol.rel,
        abs: tol.abs,
    };
    let h0 = 0.01 / (p.j.abs() + p.kappa * cfg.sites as f64);
    let mut integ = Integrator::new(dim * dim, tolerance, h0, tol.max_steps);
    let mut t = 0.0;
    let mut states = Vec::with_capacity(cfg.checkpoints.len());
    for target in cfg.physical_times() {
        integ.advance_to(&mut rhs, &mut t, &mut rho, target, |time, r| {
            for a in 0..dim {
                for b in a..dim {
                    let m = 0.5 * (r[a * dim + b] + r[b * dim + a].conj());
                    r[a * dim + b] = m;
                    r[b * dim + a] = m.conj();
                }
            }
            let drift = (trace(r, dim) - 1.0).abs();
            if drift > 1e-6 {
                return Err(Error::TraceDrift { drift, time });
            }
            Ok(true)
        })?;
        states.push(rho.clone());
    }

    let corr: Vec<ChainCorrelations> = states
        .iter()
        .map(|r| density_matrix_correlations(&ops.basis, r))
        .collect::<Result<_>>()?;
    let series = ObservableSeries::new(
        cfg.checkpoints.clone(),
        corr.iter().map(|c| c.density()).collect(),
        corr.iter().map(|c| p.j * c.current_over_j()).collect(),
        corr.iter().map(|c| p.j * c.energy_over_j()).collect(),
        format!(
            "dense-lindblad L={} J={} kappa={} phi={} theta={}",
            cfg.sites, p.j, p.kappa, p.phi, p.theta
        ),
    )?;
    Ok(DenseLindbladRun {
        trace: states.iter().map(|r| trace(r, dim)).collect(),
        purity: states.iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect(),
        states,
        series,
        stats: integ.stats(),
        basis: ops.basis,
    })
}

fn trace(r: &[Complex64], dim: usize) -> f64 {
    (0..dim).map(|a| r[a * dim + a].re).sum()
}
