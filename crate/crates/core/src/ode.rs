//! Dormand–Prince 5(4) explicit Runge–Kutta pair with proportional–integral
//! step control and the standard fourth-order continuous extension.
//!
//! The stepper works on flat vectors of `f64` or `Complex64`; the error norm is
//! the RMS of `err_i / (abs_tol + rel_tol * max(|y_i|, |y_new_i|))`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Fifth-order minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Single-step engine. Callers own the outer loop; see [`Integrator`] for the
/// checkpoint-driven loop.
#[derive(Debug, Clone)]
pub struct DormandPrince<T: Scalar> {
    tol: Tolerance,
    k: [Vec<T>; 7],
    stage: Vec<T>,
    y_new: Vec<T>,
    y_old: Vec<T>,
    h_last: f64,
    fsal: bool,
    err_old: f64,
    pub stats: StepStats,
}

impl<T: Scalar> DormandPrince<T> {
    pub fn new(dim: usize, tol: Tolerance) -> Self {
        let z = vec![T::zero(); dim];
        Self {
            tol,
            k: std::array::from_fn(|_| z.clone()),
            stage: z.clone(),
            y_new: z.clone(),
            y_old: z,
            h_last: 0.0,
            fsal: false,
            err_old: 1e-4,
            stats: StepStats::default(),
        }
    }

    /// Forget the cached derivative; required after the state is changed
    /// outside the stepper.
    pub fn invalidate(&mut self) {
        self.fsal = false;
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Computes a candidate step of size `h` from `(t, y)` and returns its
    /// scaled error norm. The candidate is kept until [`accept`](Self::accept).
    pub fn attempt<F>(&mut self, rhs: &mut F, t: f64, y: &[T], h: f64) -> f64
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        if !self.fsal {
            rhs(t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal = true;
        }
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let s = &mut self.stage;

        for i in 0..n {
            s[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(t + C2 * h, s, k2);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(t + C3 * h, s, k3);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(t + C4 * h, s, k4);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(t + C5 * h, s, k5);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        rhs(t + h, s, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs(t + h, y_new, k7);
        self.stats.rhs_evals += 6;

        let mut acc = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            finite &= y_new[i].finite();
            let scale = self.tol.abs + self.tol.rel * y[i].magnitude().max(y_new[i].magnitude());
            let r = e.magnitude() / scale;
            acc += r * r;
        }
        if !finite {
            return f64::NAN;
        }
        (acc / n.max(1) as f64).sqrt()
    }

    /// Commits the last candidate into `y` and returns the proposed next step.
    pub fn accept(&mut self, y: &mut Vec<T>, h: f64, err: f64) -> f64 {
        std::mem::swap(&mut self.y_old, y);
        y.clone_from(&self.y_new);
        self.h_last = h;
        // y_old now holds the start of the step; keep k1 for dense output by
        // rotating FSAL only when the next attempt starts.
        self.k.swap(0, 6);
        // After the swap k[0] = f(t+h, y_new) and k[6] holds the old k1.
        self.stats.accepted += 1;
        let fac11 = err.max(1e-10).powf(0.2 - BETA * 0.75);
        let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        self.err_old = err.max(1e-4);
        h / fac
    }

    /// Proposed step after a rejected attempt of size `h`.
    pub fn reject(&mut self, h: f64, err: f64) -> f64 {
        self.stats.rejected += 1;
        let fac11 = err.powf(0.2 - BETA * 0.75);
        h / (fac11 / SAFETY).min(1.0 / FAC_MIN)
    }

    /// Continuous extension over the last accepted step, `theta ∈ [0, 1]`.
    pub fn dense(&self, theta: f64, out: &mut [T]) {
        let h = self.h_last;
        let (k1, k3, k4, k5, k6, k7) = (&self.k[6], &self.k[2], &self.k[3], &self.k[4], &self.k[5], &self.k[0]);
        let y0 = &self.y_old;
        let y1 = &self.y_new;
        let t1 = 1.0 - theta;
        for i in 0..out.len() {
            let ydiff = y1[i] - y0[i];
            let bspl = k1[i] * h - ydiff;
            let r4 = ydiff - k7[i] * h - bspl;
            let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
            out[i] = y0[i] + (ydiff + (bspl + (r4 + r5 * t1) * theta) * t1) * theta;
        }
    }
}

/// Checkpoint-driven adaptive loop around [`DormandPrince`].
#[derive(Debug, Clone)]
pub struct Integrator<T: Scalar> {
    pub stepper: DormandPrince<T>,
    h: f64,
    max_steps: usize,
    steps: usize,
}

impl<T: Scalar> Integrator<T> {
    pub fn new(dim: usize, tol: Tolerance, h_init: f64, max_steps: usize) -> Self {
        Self {
            stepper: DormandPrince::new(dim, tol),
            h: h_init,
            max_steps,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stats(&self) -> StepStats {
        self.stepper.stats
    }

    /// Advances `(t, y)` to exactly `t_end`. `after_step` runs on each
    /// accepted state and returns `true` if it modified it.
    pub fn advance_to<F, G>(
        &mut self,
        rhs: &mut F,
        t: &mut f64,
        y: &mut Vec<T>,
        t_end: f64,
        mut after_step: G,
    ) -> Result<()>
    where
        F: FnMut(f64, &[T], &mut [T]),
        G: FnMut(f64, &mut [T]) -> Result<bool>,
    {
        while *t < t_end {
            if self.steps >= self.max_steps {
                return Err(Error::StepBudget {
                    budget: self.max_steps,
                    time: *t,
                });
            }
            let remaining = t_end - *t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { time: *t });
            }
            let err = self.stepper.attempt(rhs, *t, y, h);
            if !err.is_finite() {
                return Err(Error::NonFiniteState { time: *t + h });
            }
            self.steps += 1;
            if err <= 1.0 {
                let proposal = self.stepper.accept(y, h, err);
                *t = if clipped { t_end } else { *t + h };
                if !clipped || proposal < self.h {
                    self.h = proposal;
                }
                if after_step(*t, y)? {
                    self.stepper.invalidate();
                }
            } else {
                self.h = self.stepper.reject(h, err);
            }
        }
        Ok(())
    }
}
