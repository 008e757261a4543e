//! Rapidity-distribution dynamics of the XX spin chain with two-site,
//! non-reciprocal losses.
//!
//! * [`spectral`]: periodic momentum grid, mean, circular Hilbert transforms.
//! * [`dynamics`]: t-GGE and free-fermion rate equations and their integration.
//! * [`observables`]: density, current, energy, logarithmic derivatives, fits.
//! * [`oracles`]: Bessel closed forms, quadrature and asymptotics for free fermions.
//! * [`bench`]: exact finite-chain references (quantum trajectories, dense
//!   master equation, parity-sector momentum occupations).

pub mod bench;
pub mod dynamics;
pub mod error;
pub mod observables;
pub mod ode;
pub mod oracles;
pub mod spectral;

pub use dynamics::{
    evolve, free_fermion_exact, free_fermion_rhs, initial_rapidity, log_checkpoints, tgge_rhs, Evolution,
    IntegratorConfig, ModelParams, RapidityState, RateEquation,
};
pub use error::{Error, Result};
pub use spectral::{hilbert, hilbert_deriv, mean, FourierGrid, PeriodicFunction};
