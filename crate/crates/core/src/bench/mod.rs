//! Exact finite-chain references on a periodic ring of `L` spins: quantum-jump
//! trajectories, a dense master-equation integrator for small rings, and the
//! parity-sector momentum occupations of the resulting states.

mod correlators;
mod lindblad;
mod operators;
mod trajectories;

use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};

pub use correlators::{
    antiperiodic_momenta, density_matrix_correlations, interleaved_momenta, periodic_momenta, pure_state_correlations,
    ChainCorrelations, MomentumCorrelations, SectorOccupations,
};
pub use lindblad::{dense_lindblad, dense_lindblad_with, DenseLindbladRun, LindbladTolerance};
pub use operators::{build_operators, initial_spin_state, CsrMatrix, SectorBasis, SpinOperators};
pub use trajectories::{
    momentum_occupations, run_trajectories, run_trajectory_statistics, CheckpointStatistics, ComplexEstimate,
    EnsembleStatistics, Estimate, JumpEvent, TrajectoryEnsemble,
};

/// Step control of the deterministic no-jump evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Accuracy of the squared norm at which a jump fires.
    pub norm_tol: f64,
    /// Step budget per trajectory.
    pub max_steps: usize,
}

impl Default for TrajectoryControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            norm_tol: 1e-8,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainConfig {
    pub sites: usize,
    pub params: ModelParams,
    pub n_traj: usize,
    pub seed: u64,
    /// Output times as `κt`, strictly increasing.
    pub checkpoints: Vec<f64>,
    pub control: TrajectoryControl,
}

impl SpinChainConfig {
    pub fn new(sites: usize, params: ModelParams, n_traj: usize, seed: u64, checkpoints: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            sites,
            params,
            n_traj,
            seed,
            checkpoints,
            control: TrajectoryControl::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        operators::check_sites(self.sites)?;
        self.params.validate()?;
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
        }
        if self.checkpoints.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidConfig("checkpoints must be finite and >= 0".into()));
        }
        if self.checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        let c = &self.control;
        if !(c.rel_tol > 0.0 && c.abs_tol > 0.0 && c.norm_tol > 0.0 && c.max_steps > 0) {
            return Err(Error::InvalidConfig(format!("bad trajectory control {c:?}")));
        }
        Ok(())
    }

    /// Checkpoints in physical time.
    pub(crate) fn physical_times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|kt| kt / self.params.kappa).collect()
    }
}
