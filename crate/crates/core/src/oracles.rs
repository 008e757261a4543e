//! Closed-form and asymptotic reference results for the lossy free-fermion
//! chain and the product-state correlators.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use crate::dynamics::initial_rapidity_at;
use crate::error::{Error, Result};

const BESSEL_SWITCH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Zero,
    One,
}

impl BesselOrder {
    fn alpha(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::One => 1.0,
        }
    }
}

/// Modified Bessel function of the first kind, `I_0` or `I_1`, for `x ≥ 0`.
///
/// Overflows for `x ≳ 700`; use [`bessel_i_scaled`] there.
pub fn bessel_i(order: BesselOrder, x: f64) -> Result<f64> {
    check_bessel_arg(x)?;
    if x <= BESSEL_SWITCH {
        Ok(bessel_series(order, x))
    } else {
        Ok(x.exp() * asymptotic_scaled(order, x))
    }
}

/// `e^{-x} I_α(x)`, finite for all `x ≥ 0`.
pub fn bessel_i_scaled(order: BesselOrder, x: f64) -> Result<f64> {
    check_bessel_arg(x)?;
    if x <= BESSEL_SWITCH {
        Ok((-x).exp() * bessel_series(order, x))
    } else {
        Ok(asymptotic_scaled(order, x))
    }
}

fn check_bessel_arg(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "x",
            value: x,
            constraint: "x >= 0 (use I_a(-x) = (-1)^a I_a(x))",
        })
    }
}

fn bessel_series(order: BesselOrder, x: f64) -> f64 {
    let alpha = order.alpha();
    let q = 0.25 * x * x;
    // k = 0 term: (x/2)^α / α!
    let mut term = if alpha == 0.0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + alpha));
        sum += term;
        if term <= 1e-16 * sum {
            return sum;
        }
    }
}

/// `e^{-x} I_α(x) = (2πx)^{-1/2} Σ_j (-1)^j a_j(α) x^{-j}`, truncated at the
/// smallest term.
fn asymptotic_scaled(order: BesselOrder, x: f64) -> f64 {
    let mu = 4.0 * order.alpha().powi(2);
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut j = 0.0;
    loop {
        j += 1.0;
        let odd = 2.0 * j - 1.0;
        let next = -term * (mu - odd * odd) / (j * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            break;
        }
        term = next;
        sum += term;
    }
    sum / (TAU * x).sqrt()
}

/// Free-fermion density in closed form. Only `θ = 0` and `θ = π/4` have one:
///
/// * `θ = 0`: `e^{-2κt} I₀(2κt)`
/// * `θ = π/4`: `½ e^{-2κt} [I₀(2κt) - cos φ I₁(2κt)]`
pub fn ff_density_closed(theta: f64, phi: f64, kt: f64) -> Result<f64> {
    if !(kt >= 0.0) {
        return Err(Error::Domain {
            name: "kt",
            value: kt,
            constraint: "kt >= 0",
        });
    }
    let x = 2.0 * kt;
    let i0 = bessel_i_scaled(BesselOrder::Zero, x)?;
    if theta.abs() < 1e-12 {
        Ok(i0)
    } else if (theta - FRAC_PI_4).abs() < 1e-12 {
        let i1 = bessel_i_scaled(BesselOrder::One, x)?;
        Ok(0.5 * (i0 - phi.cos() * i1))
    } else {
        Err(Error::Domain {
            name: "theta",
            value: theta,
            constraint: "closed form exists only for theta in {0, pi/4}",
        })
    }
}

/// Free-fermion density `∫ dk/2π ρ₀(k) e^{-2κt(1 + cos(φ + k))}` by adaptive
/// Gauss–Kronrod quadrature; valid for any `θ ∈ [0, π/2)`.
pub fn ff_density_quadrature(theta: f64, phi: f64, kt: f64) -> Result<f64> {
    crate::dynamics::check_theta(theta)?;
    if !(kt >= 0.0) {
        return Err(Error::Domain {
            name: "kt",
            value: kt,
            constraint: "kt >= 0",
        });
    }
    let k_star = PI - phi;
    let integrand = |k: f64| initial_rapidity_at(theta, k) * (-2.0 * kt * (1.0 + (phi + k).cos())).exp();
    // Integrate one period centred on the slow mode, split at the peak.
    let left = integrate_adaptive(&integrand, k_star - PI, k_star, 1e-14, 1e-13);
    let right = integrate_adaptive(&integrand, k_star, k_star + PI, 1e-14, 1e-13);
    Ok((left + right) / TAU)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeFermionAsymptotics {
    /// Decay exponent `χ` in `n ~ (κt)^{-χ}`.
    pub chi: f64,
    /// Two-term large-`κt` expansion of `n`, available for `θ ∈ {0, π/4}`.
    pub two_term: Option<f64>,
}

pub fn ff_asymptotic(theta: f64, phi: f64, kt: f64) -> Result<FreeFermionAsymptotics> {
    crate::dynamics::check_theta(theta)?;
    if !(kt >= 10.0) {
        return Err(Error::Domain {
            name: "kt",
            value: kt,
            constraint: "asymptotics require kt >= 10",
        });
    }
    let chi = if phi.abs() < 1e-12 && theta > 0.0 { 1.5 } else { 0.5 };
    let root = (PI * kt).sqrt();
    let two_term = if theta.abs() < 1e-12 {
        Some((1.0 + 1.0 / (16.0 * kt)) / (2.0 * root))
    } else if (theta - FRAC_PI_4).abs() < 1e-12 {
        let c = phi.cos();
        Some((1.0 - c + (1.0 + 3.0 * c) / (16.0 * kt)) / (4.0 * root))
    } else {
        None
    };
    Ok(FreeFermionAsymptotics { chi, two_term })
}

/// `⟨c_j† c_l⟩` in the product state at angle `θ`, for `|j - l| = separation`.
pub fn initial_corr(theta: f64, separation: i64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    match separation.unsigned_abs() {
        0 => c2,
        d => c2 * s2 * (s2 - c2).powi((d - 1) as i32),
    }
}

// Gauss–Kronrod 7/15 nodes and weights (positive half, centre last).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature; bisects the interval with the
/// largest error estimate until `err ≤ max(abs_tol, rel_tol·|I|)`.
pub fn integrate_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut error = e;
    while error > abs_tol.max(rel_tol * total.abs()) && pieces.len() < 4000 {
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, v, e) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total += v1 + v2 - v;
        error += e1 + e2 - e;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    pieces.iter().map(|p| p.2).sum()
}
