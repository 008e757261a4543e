//! Uniform periodic momentum grid and the Fourier-multiplier operators used by
//! the rate equations: sample mean, circular Hilbert transform and the
//! derivative of the Hilbert transform.
//!
//! Forward transforms are normalized by `1/M`, so the zeroth coefficient is the
//! sample mean. Frequencies are indexed `n = m` for `m < M/2`, `n = m - M` for
//! `m > M/2`; the Nyquist bin `m = M/2` is killed by [`hilbert`] and weighted by
//! `M/2` in [`hilbert_deriv`].

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// `M` equispaced nodes `k_m = 2πm/M` on `[0, 2π)`.
#[derive(Clone)]
pub struct FourierGrid {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid").field("size", &self.size).finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
    }
}

impl FourierGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid(size));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.size as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        TAU * m as f64 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|m| self.node(m)).collect()
    }

    /// Signed frequency of FFT bin `m`; the Nyquist bin reports `+M/2`.
    pub fn frequency(&self, m: usize) -> i64 {
        let half = self.size / 2;
        if m <= half {
            m as i64
        } else {
            m as i64 - self.size as i64
        }
    }

    pub(crate) fn is_nyquist(&self, m: usize) -> bool {
        m == self.size / 2
    }

    /// Normalized forward transform of complex data, in place.
    pub(crate) fn forward_in_place(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.forward.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        self.forward.process_with_scratch(data, scratch);
        let scale = 1.0 / self.size as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Unnormalized inverse transform (synthesis `Σ f̂_n e^{ink}`), in place.
    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.inverse.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        self.inverse.process_with_scratch(data, scratch);
    }

    /// `-i sgn(n)` with the Nyquist bin set to zero.
    pub(crate) fn hilbert_multiplier(&self, m: usize) -> Complex64 {
        if self.is_nyquist(m) {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.frequency(m);
        Complex64::new(0.0, -(n.signum() as f64))
    }

    /// `|n|`, with `M/2` at the Nyquist bin.
    pub(crate) fn deriv_multiplier(&self, m: usize) -> f64 {
        self.frequency(m).unsigned_abs() as f64
    }
}

/// Real samples of a function on a [`FourierGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    grid: FourierGrid,
    values: Vec<f64>,
}

impl PeriodicFunction {
    pub fn new(grid: &FourierGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "periodic function",
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                what: "periodic function",
                index,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &FourierGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|m| f(grid.node(m))).collect())
    }

    pub(crate) fn from_parts_unchecked(grid: &FourierGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cyclic shift by `s` nodes: `out[m] = self[m - s]`.
    pub fn shifted(&self, s: isize) -> Self {
        let m = self.values.len() as isize;
        let values = (0..m).map(|i| self.values[(i - s).rem_euclid(m) as usize]).collect();
        Self::from_parts_unchecked(&self.grid, values)
    }
}

/// Periodic trapezoid rule, `(1/M) Σ f(k_m)`.
pub fn mean(f: &PeriodicFunction) -> f64 {
    sample_mean(f.values())
}

pub(crate) fn sample_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Circular Hilbert transform `PV ∫ dp/2π cot((k-p)/2) f(p)`.
pub fn hilbert(f: &PeriodicFunction) -> PeriodicFunction {
    apply_real_multiplier(f, |grid, m| grid.hilbert_multiplier(m))
}

/// Derivative of the circular Hilbert transform,
/// `½ PV ∫ dp/2π (f(k) - f(p)) / sin²((k-p)/2)`.
pub fn hilbert_deriv(f: &PeriodicFunction) -> PeriodicFunction {
    apply_real_multiplier(f, |grid, m| Complex64::new(grid.deriv_multiplier(m), 0.0))
}

fn apply_real_multiplier(
    f: &PeriodicFunction,
    multiplier: impl Fn(&FourierGrid, usize) -> Complex64,
) -> PeriodicFunction {
    let grid = f.grid();
    let mut scratch = Vec::new();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.forward_in_place(&mut data, &mut scratch);
    for (m, z) in data.iter_mut().enumerate() {
        *z *= multiplier(grid, m);
    }
    grid.inverse_in_place(&mut data, &mut scratch);
    debug_assert!({
        let scale = data.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
        data.iter().all(|z| z.im.abs() <= 1e-12 * scale)
    });
    PeriodicFunction::from_parts_unchecked(grid, data.into_iter().map(|z| z.re).collect())
}

/// Reusable buffers for the fused transforms evaluated on every right-hand-side
/// call of the rate equation.
#[derive(Debug, Clone)]
pub(crate) struct SpectralScratch {
    pub(crate) a: Vec<Complex64>,
    pub(crate) b: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl SpectralScratch {
    pub(crate) fn new(grid: &FourierGrid) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            a: vec![zero; grid.len()],
            b: vec![zero; grid.len()],
            fft: Vec::new(),
        }
    }

    /// Loads `f` into `a` and leaves `H[f]` in `a.re` and `H[f]'` in `a.im`.
    /// Returns the mean of `f`.
    pub(crate) fn hilbert_and_deriv(&mut self, grid: &FourierGrid, f: &[f64]) -> f64 {
        for (z, &v) in self.a.iter_mut().zip(f) {
            *z = Complex64::new(v, 0.0);
        }
        grid.forward_in_place(&mut self.a, &mut self.fft);
        let mean = self.a[0].re;
        let i = Complex64::new(0.0, 1.0);
        for (m, z) in self.a.iter_mut().enumerate() {
            let c = *z;
            *z = grid.hilbert_multiplier(m) * c + i * grid.deriv_multiplier(m) * c;
        }
        grid.inverse_in_place(&mut self.a, &mut self.fft);
        mean
    }

    /// Hilbert transform of complex samples held in `b`, in place.
    /// Returns the mean of the input.
    pub(crate) fn hilbert_complex(&mut self, grid: &FourierGrid) -> Complex64 {
        grid.forward_in_place(&mut self.b, &mut self.fft);
        let mean = self.b[0];
        for (m, z) in self.b.iter_mut().enumerate() {
            *z *= grid.hilbert_multiplier(m);
        }
        grid.inverse_in_place(&mut self.b, &mut self.fft);
        mean
    }
}
