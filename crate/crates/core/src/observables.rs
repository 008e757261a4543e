//! Physical observables of a rapidity distribution and fits on their time
//! series. Times are always dimensionless `κt`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, RapidityState};
use crate::error::{Error, Result};
use crate::spectral::sample_mean;

/// Ratios whose denominator is smaller than this are reported as missing.
pub const RATIO_GUARD: f64 = 1e-14;

pub fn density(state: &RapidityState) -> f64 {
    sample_mean(state.rho())
}

/// Hamiltonian magnetization current `J ∫ dk/2π sin(k) ρ(k)`.
pub fn current(state: &RapidityState, j: f64) -> f64 {
    j * weighted_mean(state, f64::sin)
}

/// Energy density `-J ∫ dk/2π cos(k) ρ(k)`.
pub fn energy_density(state: &RapidityState, j: f64) -> f64 {
    -j * weighted_mean(state, f64::cos)
}

fn weighted_mean(state: &RapidityState, w: fn(f64) -> f64) -> f64 {
    let grid = state.grid();
    let sum: f64 = state.rho().iter().enumerate().map(|(m, r)| w(grid.node(m)) * r).sum();
    sum / grid.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    /// `κt`, strictly increasing.
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub current: Vec<f64>,
    pub energy: Vec<f64>,
    pub provenance: String,
}

impl ObservableSeries {
    pub fn new(
        times: Vec<f64>,
        n: Vec<f64>,
        current: Vec<f64>,
        energy: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let len = times.len();
        for (what, v) in [
            ("series n", &n),
            ("series current", &current),
            ("series energy", &energy),
        ] {
            if v.len() != len {
                return Err(Error::LengthMismatch {
                    what,
                    expected: len,
                    got: v.len(),
                });
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("series times must be strictly increasing".into()));
        }
        if let Some(&bad) = n.iter().find(|&&x| !(x <= 1.0 + 1e-8)) {
            return Err(Error::Domain {
                name: "n",
                value: bad,
                constraint: "n <= 1 + 1e-8",
            });
        }
        Ok(Self {
            times,
            n,
            current,
            energy,
            provenance: provenance.into(),
        })
    }

    /// Series of density, current and energy for checkpoint states.
    pub fn from_states(states: &[RapidityState], params: &ModelParams, provenance: impl Into<String>) -> Result<Self> {
        Self::new(
            states.iter().map(|s| params.kappa * s.time()).collect(),
            states.iter().map(density).collect(),
            states.iter().map(|s| current(s, params.j)).collect(),
            states.iter().map(|s| energy_density(s, params.j)).collect(),
            provenance,
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `D₁ = -d log n / d log κt` and `D₂ = d² log n / d(log κt)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDerivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// `true` where a one-sided endpoint stencil was used.
    pub one_sided: Vec<bool>,
}

/// First and second derivative at `at` of the parabola through three points.
fn parabola_derivatives(x: [f64; 3], y: [f64; 3], at: f64) -> (f64, f64) {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let first = y[0] * (2.0 * at - x1 - x2) / d0 + y[1] * (2.0 * at - x0 - x2) / d1 + y[2] * (2.0 * at - x0 - x1) / d2;
    let second = 2.0 * (y[0] / d0 + y[1] / d1 + y[2] / d2);
    (first, second)
}

pub fn log_derivatives(kt: &[f64], n: &[f64]) -> Result<LogDerivatives> {
    if kt.len() != n.len() {
        return Err(Error::LengthMismatch {
            what: "log derivative input",
            expected: kt.len(),
            got: n.len(),
        });
    }
    if kt.len() < 5 {
        return Err(Error::TooFewPoints(format!(
            "log derivatives need >= 5 points, got {}",
            kt.len()
        )));
    }
    if let Some(&bad) = n.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain {
            name: "n",
            value: bad,
            constraint: "n > 0 for logarithmic derivatives",
        });
    }
    if let Some(&bad) = kt.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain {
            name: "kt",
            value: bad,
            constraint: "kt > 0 for logarithmic derivatives",
        });
    }
    let x: Vec<f64> = kt.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let last = x.len() - 1;
    let mut out = LogDerivatives {
        d1: Vec::with_capacity(x.len()),
        d2: Vec::with_capacity(x.len()),
        one_sided: Vec::with_capacity(x.len()),
    };
    for i in 0..x.len() {
        let centre = i.clamp(1, last - 1);
        let xs = [x[centre - 1], x[centre], x[centre + 1]];
        let ys = [y[centre - 1], y[centre], y[centre + 1]];
        let (first, second) = parabola_derivatives(xs, ys, x[i]);
        out.d1.push(-first);
        out.d2.push(second);
        out.one_sided.push(i == 0 || i == last);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// `χ` in `n ~ (κt)^{-χ}`.
    pub chi: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of `log n` against `log κt` inside `window`.
pub fn fit_power_law(kt: &[f64], n: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig(format!("bad fit window [{lo}, {hi}]")));
    }
    if let (Some(&first), Some(&last)) = (kt.first(), kt.last()) {
        let slack = 1e-9;
        if lo < first * (1.0 - slack) || hi > last * (1.0 + slack) {
            return Err(Error::InvalidConfig(format!(
                "fit window [{lo}, {hi}] outside series range [{first}, {last}]"
            )));
        }
    }
    let pts: Vec<(f64, f64)> = kt
        .iter()
        .zip(n)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::TooFewPoints(format!(
            "power-law fit needs >= 10 points in [{lo}, {hi}], got {}",
            pts.len()
        )));
    }
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::FitRejected("non-positive density inside fit window".into()));
    }
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (count - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        chi: -slope,
        stderr,
        window,
        points: pts.len(),
    })
}

/// Parameters of `𝒜 exp(-(k - k*)² / 2σ²)` fitted to a peaked distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeakFit {
    pub amplitude: f64,
    pub sigma: f64,
    pub center: f64,
    /// Weighted RMS residual of `log ρ`.
    pub residual: f64,
    pub points: usize,
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Weighted least squares of `log ρ` against a quadratic in `k - k_max` over
/// the contiguous nodes around the maximum with `ρ ≥ 10⁻³ max ρ`; weights `ρ²`.
pub fn fit_gaussian_peak(state: &RapidityState, k_center_hint: f64) -> Result<GaussianPeakFit> {
    let grid = state.grid();
    let rho = state.rho();
    let m = rho.len();
    let window = PI / 4.0;

    let (imax, &peak) = rho
        .iter()
        .enumerate()
        .filter(|(i, _)| circular_distance(grid.node(*i), k_center_hint) <= window)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitRejected("no grid node within pi/4 of the hint".into()))?;
    let ties = rho
        .iter()
        .enumerate()
        .filter(|(i, v)| *i != imax && **v == peak && circular_distance(grid.node(*i), k_center_hint) <= window)
        .count();
    if ties > 0 {
        return Err(Error::FitRejected(format!(
            "maximum {peak} is not unique near the hint"
        )));
    }
    let mut sorted = rho.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[(m - 1) / 2] + sorted[m / 2]);
    if !(peak > 10.0 * median) {
        return Err(Error::FitRejected(format!(
            "no clear peak: max {peak}, median {median}"
        )));
    }

    let threshold = 1e-3 * peak;
    let mut offsets = vec![0_isize];
    for dir in [-1_isize, 1] {
        let mut s = dir;
        while s.unsigned_abs() < m / 2 && rho[(imax as isize + s).rem_euclid(m as isize) as usize] >= threshold {
            offsets.push(s);
            s += dir;
        }
    }
    if offsets.len() < 3 {
        return Err(Error::FitRejected(format!(
            "peak at node {imax} spans fewer than 3 nodes"
        )));
    }

    let dk = grid.spacing();
    // Normal equations for log ρ ≈ c0 + c1 δ + c2 δ².
    let mut a = [[0.0_f64; 3]; 3];
    let mut rhs = [0.0_f64; 3];
    let samples: Vec<(f64, f64, f64)> = offsets
        .iter()
        .map(|&s| {
            let v = rho[(imax as isize + s).rem_euclid(m as isize) as usize];
            (s as f64 * dk, v.ln(), v * v)
        })
        .collect();
    for &(d, ly, w) in &samples {
        let basis = [1.0, d, d * d];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += w * basis[r] * basis[c];
            }
            rhs[r] += w * basis[r] * ly;
        }
    }
    let [c0, c1, c2] = solve3(a, rhs).ok_or_else(|| Error::FitRejected("singular normal equations".into()))?;
    if !(c2 < 0.0) {
        return Err(Error::FitRejected(format!("log-curvature {c2} is not negative")));
    }
    let sigma = (-0.5 / c2).sqrt();
    let shift = -c1 / (2.0 * c2);
    let center = (grid.node(imax) + shift).rem_euclid(TAU);
    let amplitude = (c0 - c1 * c1 / (4.0 * c2)).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for &(d, ly, w) in &samples {
        let fit = c0 + c1 * d + c2 * d * d;
        num += w * (ly - fit).powi(2);
        den += w;
    }
    Ok(GaussianPeakFit {
        amplitude,
        sigma,
        center,
        residual: (num / den).sqrt(),
        points: samples.len(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// `𝒥/(Jn)`, `ε/(Jn)` and `𝒥/ε` per time; `None` where the denominator is
/// below [`RATIO_GUARD`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub current_over_n: Vec<Option<f64>>,
    pub energy_over_n: Vec<Option<f64>>,
    pub current_over_energy: Vec<Option<f64>>,
}

pub fn ratio_series(series: &ObservableSeries, j: f64) -> RatioSeries {
    let guarded = |num: f64, den: f64| (den.abs() >= RATIO_GUARD).then(|| num / den);
    let mut out = RatioSeries {
        current_over_n: Vec::with_capacity(series.len()),
        energy_over_n: Vec::with_capacity(series.len()),
        current_over_energy: Vec::with_capacity(series.len()),
    };
    for i in 0..series.len() {
        let jn = j * series.n[i];
        out.current_over_n.push(guarded(series.current[i], jn));
        out.energy_over_n.push(guarded(series.energy[i], jn));
        out.current_over_energy
            .push(guarded(series.current[i], series.energy[i]));
    }
    out
}

/// Number of strict sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// First time where a sequence changes sign, by linear interpolation in `times`.
pub fn first_crossing(times: &[f64], values: &[f64]) -> Option<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .find(|(_, v)| v[0] != 0.0 && v[0].signum() != v[1].signum())
        .map(|(t, v)| t[0] + (t[1] - t[0]) * v[0] / (v[0] - v[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{free_fermion_exact, initial_rapidity};
    use crate::spectral::FourierGrid;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn grid(m: usize) -> FourierGrid {
        FourierGrid::new(m).unwrap()
    }

    fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
            .collect()
    }

    fn gaussian_state(g: &FourierGrid, amp: f64, sigma: f64, centre: f64) -> RapidityState {
        let rho = g
            .nodes()
            .into_iter()
            .map(|k| {
                let d = (k - centre + PI).rem_euclid(TAU) - PI;
                amp * (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        RapidityState::new(g, rho, 0.0).unwrap()
    }

    #[test]
    fn density_examples() {
        let g = grid(64);
        assert_eq!(density(&initial_rapidity(0.0, &g).unwrap()), 1.0);
        assert!((density(&initial_rapidity(FRAC_PI_4, &g).unwrap()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn current_and_energy_examples() {
        let g = grid(256);
        for theta in [0.0, 0.4, FRAC_PI_4] {
            let s = initial_rapidity(theta, &g).unwrap();
            assert!(current(&s, 1.0).abs() < 1e-15);
        }
        let c = RapidityState::new(&g, vec![0.3; 256], 0.0).unwrap();
        assert!(energy_density(&c, 2.0).abs() < 1e-15);
        let plus = initial_rapidity(FRAC_PI_4, &g).unwrap();
        assert!((energy_density(&plus, 1.0) + 0.25).abs() < 1e-15);

        let narrow = gaussian_state(&grid(8192), 0.4, 1e-3, 1.5 * PI);
        let n = density(&narrow);
        assert!((current(&narrow, 1.0) / n + 1.0).abs() < 1e-6);
    }

    #[test]
    fn ratios_at_slow_mode_peak() {
        let g = grid(8192);
        for phi in [-FRAC_PI_2, -FRAC_PI_4, 0.7] {
            let p = ModelParams::new(1.3, 0.1, phi, 0.0).unwrap();
            let s = gaussian_state(&g, 0.2, 1e-3, p.slow_mode());
            let series = ObservableSeries::from_states(&[s], &p, "peak").unwrap();
            let r = ratio_series(&series, p.j);
            assert!((r.current_over_n[0].unwrap() - phi.sin()).abs() < 1e-5);
            assert!((r.energy_over_n[0].unwrap() - phi.cos()).abs() < 1e-5);
            if phi.cos().abs() > 0.1 {
                assert!((r.current_over_energy[0].unwrap() - phi.tan()).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn ratio_guard_emits_missing() {
        let s = ObservableSeries::new(vec![1.0, 2.0], vec![0.0, 0.5], vec![0.0, 0.1], vec![0.0, 0.0], "x").unwrap();
        let r = ratio_series(&s, 1.0);
        assert_eq!(r.current_over_n[0], None);
        assert_eq!(r.current_over_n[1], Some(0.2));
        assert_eq!(r.current_over_energy[1], None);
    }

    #[test]
    fn series_validation() {
        assert!(ObservableSeries::new(vec![1.0, 1.0], vec![0.1; 2], vec![0.0; 2], vec![0.0; 2], "x").is_err());
        assert!(ObservableSeries::new(vec![1.0], vec![1.1], vec![0.0], vec![0.0], "x").is_err());
        assert!(ObservableSeries::new(vec![1.0], vec![0.1, 0.2], vec![0.0], vec![0.0], "x").is_err());
    }

    #[test]
    fn log_derivatives_of_exact_power_law() {
        let kt = log_times(1.0, 1e4, 50);
        let n: Vec<f64> = kt.iter().map(|t| 0.37 * t.powf(-0.5)).collect();
        let d = log_derivatives(&kt, &n).unwrap();
        assert!(d.d1.iter().all(|v| (v - 0.5).abs() < 1e-8));
        assert!(d.d2.iter().all(|v| v.abs() < 1e-8));
        assert!(d.one_sided[0] && d.one_sided[49] && !d.one_sided[1]);
    }

    #[test]
    fn log_derivatives_of_bessel_density() {
        let kt = log_times(1e2, 1e4, 100);
        let n: Vec<f64> = kt
            .iter()
            .map(|&t| crate::oracles::ff_density_closed(0.0, 0.0, t).unwrap())
            .collect();
        let d = log_derivatives(&kt, &n).unwrap();
        // D₁ = ½ + O(1/κt), D₂ = O(1/κt).
        assert!(d.d1.iter().all(|v| (v - 0.5).abs() < 2e-3));
        assert!(d.d2.iter().all(|v| v.abs() < 2e-3));
        assert!((d.d1[99] - 0.5).abs() < 2e-5);
    }

    #[test]
    fn log_correction_gives_positive_d2() {
        // log n = c - x/2 - log x with x = log κt: D₂ = 1/x² > 0.
        let kt = log_times(10.0, 1e5, 60);
        let n: Vec<f64> = kt.iter().map(|t| t.powf(-0.5) / t.ln()).collect();
        let d = log_derivatives(&kt, &n).unwrap();
        for (i, t) in kt.iter().enumerate() {
            let want = 1.0 / t.ln().powi(2);
            assert!(d.d2[i] > 0.0);
            if !d.one_sided[i] {
                assert!((d.d2[i] - want).abs() < 1e-2 * want, "{} vs {}", d.d2[i], want);
            }
        }
    }

    #[test]
    fn log_derivative_errors() {
        assert!(matches!(
            log_derivatives(&[1.0; 4], &[1.0; 4]),
            Err(Error::TooFewPoints(_))
        ));
        let kt = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            log_derivatives(&kt, &[1.0, 0.5, 0.0, 0.2, 0.1]),
            Err(Error::Domain { name: "n", .. })
        ));
    }

    #[test]
    fn power_law_fit_exact() {
        let kt = log_times(1.0, 1e4, 80);
        let n: Vec<f64> = kt.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        let fit = fit_power_law(&kt, &n, (10.0, 1e3)).unwrap();
        assert!((fit.chi - 1.5).abs() < 1e-8);
        assert!(fit.stderr < 1e-8);
        assert!(matches!(
            fit_power_law(&kt, &n, (10.0, 11.0)),
            Err(Error::TooFewPoints(_))
        ));
        assert!(fit_power_law(&kt, &n, (0.5, 1e3)).is_err());
    }

    #[test]
    fn gaussian_fit_recovers_exact_gaussian() {
        let g = grid(4096);
        let s = gaussian_state(&g, 0.3, 0.1, FRAC_PI_2);
        let fit = fit_gaussian_peak(&s, FRAC_PI_2 + 0.2).unwrap();
        assert!((fit.amplitude - 0.3).abs() < 1e-6);
        assert!((fit.sigma - 0.1).abs() < 1e-6);
        assert!((fit.center - FRAC_PI_2).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn gaussian_fit_wraps_around_zero() {
        let g = grid(2048);
        let s = gaussian_state(&g, 0.5, 0.05, 0.01);
        let fit = fit_gaussian_peak(&s, 6.2).unwrap();
        assert!(circular_distance(fit.center, 0.01) < 1e-8);
        assert!((fit.sigma - 0.05).abs() < 1e-8);
    }

    #[test]
    fn gaussian_fit_of_free_fermion_state() {
        // Near k*: ρ ∝ exp(-2κt(1 - cos ε)) ≈ exp(-κt ε²), so σ = (2κt)^{-1/2}.
        let g = grid(4096);
        let kt = 100.0;
        let s = free_fermion_exact(0.0, 0.0, 1.0, kt, &g).unwrap();
        let fit = fit_gaussian_peak(&s, PI).unwrap();
        let want = (2.0 * kt).powf(-0.5);
        assert!(((fit.sigma - want) / want).abs() < 0.02);
        assert!((fit.center - PI).abs() < 1e-9);
    }

    #[test]
    fn gaussian_fit_rejects_flat_state() {
        let g = grid(256);
        let s = initial_rapidity(0.0, &g).unwrap();
        assert!(matches!(fit_gaussian_peak(&s, 1.0), Err(Error::FitRejected(_))));
    }

    #[test]
    fn sign_change_helpers() {
        assert_eq!(sign_changes(&[1.0, 0.5, 0.0, -0.1, -2.0]), 1);
        assert_eq!(sign_changes(&[-1.0, -0.5]), 0);
        let t = first_crossing(&[1.0, 2.0, 3.0], &[1.0, 0.5, -0.5]).unwrap();
        assert!((t - 2.5).abs() < 1e-15);
    }
}
