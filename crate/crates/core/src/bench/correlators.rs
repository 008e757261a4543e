use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operators::SectorBasis;
use crate::dynamics::RapidityState;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Single-state (or density-matrix) expectation values on the chain.
///
/// `even`/`odd` hold `⟨P± c_j† c_l⟩` (row-major `L × L`, sites `j, l = 1..L`)
/// with Jordan–Wigner strings over the sites strictly between `j` and `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCorrelations {
    pub sites: usize,
    pub even: Vec<Complex64>,
    pub odd: Vec<Complex64>,
    /// Spin correlator `⟨S_j⁺ S_{j+1}⁻⟩` on every periodic bond.
    pub bonds: Vec<Complex64>,
    /// Squared norm the expectations were taken over (1 for normalized states).
    pub weight: f64,
}

struct StringTable {
    sites: usize,
    between: Vec<u32>,
}

impl StringTable {
    fn new(sites: usize) -> Self {
        let mut between = vec![0u32; sites * sites];
        for a in 0..sites {
            for b in 0..sites {
                let (lo, hi) = (a.min(b), a.max(b));
                if hi > lo + 1 {
                    between[a * sites + b] = ((1u32 << hi) - 1) & !((1u32 << (lo + 1)) - 1);
                }
            }
        }
        Self { sites, between }
    }

    fn sign(&self, s: u32, a: usize, b: usize) -> f64 {
        if (s & self.between[a * self.sites + b]).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Accumulates correlators given `pair(i, i') = ⟨i|ρ|i'⟩` restricted to the
/// basis range `active`; every state reached by a hop stays inside its sector.
fn accumulate<F>(basis: &SectorBasis, active: Range<usize>, pair: F) -> ChainCorrelations
where
    F: Fn(usize, usize) -> Complex64,
{
    let sites = basis.sites();
    let table = StringTable::new(sites);
    let mut even = vec![ZERO; sites * sites];
    let mut odd = vec![ZERO; sites * sites];
    let mut bonds = vec![ZERO; sites];
    let mut weight = 0.0;
    for i in active {
        let s = basis.state(i);
        let diag = pair(i, i);
        weight += diag.re;
        let target = if s.count_ones() % 2 == 0 { &mut even } else { &mut odd };
        for l in 0..sites {
            if s & (1 << l) == 0 {
                continue;
            }
            target[l * sites + l] += diag;
            for j in 0..sites {
                if s & (1 << j) != 0 {
                    continue;
                }
                // c_j† c_l |s⟩ = sign |s'⟩, so ⟨c_j† c_l⟩ gets ρ[s, s'] sign.
                let sp = basis.index_of(s ^ (1 << l) ^ (1 << j));
                let v = pair(i, sp);
                target[j * sites + l] += v * table.sign(s, j, l);
                if (l + sites - j) % sites == 1 {
                    bonds[j] += v;
                }
            }
        }
    }
    ChainCorrelations {
        sites,
        even,
        odd,
        bonds,
        weight,
    }
}

/// Correlations of a pure state given on the basis range `active`
/// (`psi.len() == active.len()`, all other amplitudes zero).
pub fn pure_state_correlations(basis: &SectorBasis, active: Range<usize>, psi: &[Complex64]) -> ChainCorrelations {
    assert_eq!(psi.len(), active.len());
    let base = active.start;
    accumulate(basis, active, |a, b| psi[a - base] * psi[b - base].conj())
}

/// Correlations of a row-major density matrix in sector order.
pub fn density_matrix_correlations(basis: &SectorBasis, rho: &[Complex64]) -> Result<ChainCorrelations> {
    let dim = basis.dim();
    if rho.len() != dim * dim {
        return Err(Error::LengthMismatch {
            what: "density matrix",
            expected: dim * dim,
            got: rho.len(),
        });
    }
    Ok(accumulate(basis, 0..dim, |a, b| rho[a * dim + b]))
}

impl ChainCorrelations {
    pub fn site_density(&self) -> Vec<f64> {
        let l = self.sites;
        (0..l)
            .map(|j| (self.even[j * l + j] + self.odd[j * l + j]).re)
            .collect()
    }

    /// Particle density `⟨N⟩ / L`.
    pub fn density(&self) -> f64 {
        self.site_density().iter().sum::<f64>() / self.sites as f64
    }

    /// `𝒥 / J = (1/L) Σ_j Im ⟨S_j⁺ S_{j+1}⁻⟩`.
    pub fn current_over_j(&self) -> f64 {
        self.bonds.iter().map(|b| b.im).sum::<f64>() / self.sites as f64
    }

    /// `ε / J = -(1/L) Σ_j Re ⟨S_j⁺ S_{j+1}⁻⟩`.
    pub fn energy_over_j(&self) -> f64 {
        -self.bonds.iter().map(|b| b.re).sum::<f64>() / self.sites as f64
    }

    /// `⟨P± c†(k) c(q)⟩` with `c†(k) = L^{-1/2} Σ_j e^{ikj} c_j†`; antiperiodic
    /// momenta in the even sector, periodic in the odd one.
    pub fn momentum_matrices(&self) -> MomentumCorrelations {
        let l = self.sites;
        let q_ap = antiperiodic_momenta(l);
        let q_p = periodic_momenta(l);
        let transform = |c: &[Complex64], qs: &[f64]| {
            // Phases e^{ikj} for sites j = 1..L.
            let ph: Vec<Vec<Complex64>> = qs
                .iter()
                .map(|k| (1..=l).map(|j| Complex64::from_polar(1.0, k * j as f64)).collect())
                .collect();
            let mut out = vec![ZERO; l * l];
            for a in 0..l {
                for b in 0..l {
                    let mut acc = ZERO;
                    for j in 0..l {
                        for m in 0..l {
                            acc += ph[a][j] * ph[b][m].conj() * c[j * l + m];
                        }
                    }
                    out[a * l + b] = acc / l as f64;
                }
            }
            out
        };
        MomentumCorrelations {
            sites: l,
            ap: transform(&self.even, &q_ap),
            p: transform(&self.odd, &q_p),
        }
    }
}

pub fn antiperiodic_momenta(sites: usize) -> Vec<f64> {
    (0..sites).map(|n| TAU * (n as f64 + 0.5) / sites as f64).collect()
}

pub fn periodic_momenta(sites: usize) -> Vec<f64> {
    (1..=sites).map(|n| TAU * n as f64 / sites as f64).collect()
}

/// Interleaved nodes `2π(n - ¼)/L`, `n = 1..L`.
pub fn interleaved_momenta(sites: usize) -> Vec<f64> {
    (1..=sites).map(|n| TAU * (n as f64 - 0.25) / sites as f64).collect()
}

/// Momentum-space correlation matrices `[k][q]` per parity sector.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumCorrelations {
    pub sites: usize,
    pub ap: Vec<Complex64>,
    pub p: Vec<Complex64>,
}

impl MomentumCorrelations {
    pub fn occupations(&self) -> SectorOccupations {
        let l = self.sites;
        SectorOccupations::new(
            l,
            (0..l).map(|a| self.ap[a * l + a].re).collect(),
            (0..l).map(|a| self.p[a * l + a].re).collect(),
        )
    }
}

/// Sector-resolved momentum occupations and their interleaved sum `ρ̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorOccupations {
    pub q_ap: Vec<f64>,
    pub rho_ap: Vec<f64>,
    pub q_p: Vec<f64>,
    pub rho_p: Vec<f64>,
    pub k_tilde: Vec<f64>,
    pub rho_tilde: Vec<f64>,
}

impl SectorOccupations {
    pub fn new(sites: usize, rho_ap: Vec<f64>, rho_p: Vec<f64>) -> Self {
        assert_eq!(rho_ap.len(), sites);
        assert_eq!(rho_p.len(), sites);
        let rho_tilde = rho_ap.iter().zip(&rho_p).map(|(a, p)| a + p).collect();
        Self {
            q_ap: antiperiodic_momenta(sites),
            rho_ap,
            q_p: periodic_momenta(sites),
            rho_p,
            k_tilde: interleaved_momenta(sites),
            rho_tilde,
        }
    }

    pub fn sites(&self) -> usize {
        self.rho_tilde.len()
    }

    /// `max_n |ρ̃(k̃_n) - ρ(k̃_n)|` against a continuum distribution, with the
    /// node index where it occurs.
    pub fn max_deviation(&self, rho: &RapidityState) -> (f64, usize) {
        self.k_tilde
            .iter()
            .zip(&self.rho_tilde)
            .map(|(k, v)| (v - rho.sample_at(*k)).abs())
            .enumerate()
            .fold((0.0, 0), |best, (i, d)| if d > best.0 { (d, i) } else { best })
    }

    /// `(1/L) Σ ρ̃`, which equals the particle density.
    pub fn density(&self) -> f64 {
        self.rho_tilde.iter().sum::<f64>() / self.sites() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::operators::initial_spin_state;
    use std::f64::consts::FRAC_PI_4;

    fn all(basis: &SectorBasis, psi: &[Complex64]) -> ChainCorrelations {
        pure_state_correlations(basis, 0..basis.dim(), psi)
    }

    #[test]
    fn all_up_even_chain() {
        for l in [4, 6] {
            let b = SectorBasis::new(l);
            let c = all(&b, &initial_spin_state(&b, 0.0));
            let occ = c.momentum_matrices().occupations();
            assert!(occ.rho_p.iter().all(|v| v.abs() < 1e-14));
            assert!((occ.rho_ap.iter().sum::<f64>() - l as f64).abs() < 1e-12);
            // A filled band occupies every momentum once.
            assert!(occ.rho_ap.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn all_up_odd_chain_is_periodic_sector() {
        let b = SectorBasis::new(5);
        let occ = all(&b, &initial_spin_state(&b, 0.0)).momentum_matrices().occupations();
        assert!(occ.rho_ap.iter().all(|v| v.abs() < 1e-14));
        assert!(occ.rho_p.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn vacuum_is_empty() {
        let b = SectorBasis::new(6);
        let mut psi = vec![ZERO; b.dim()];
        psi[b.index_of(0)] = Complex64::new(1.0, 0.0);
        let occ = all(&b, &psi).momentum_matrices().occupations();
        assert!(occ.rho_tilde.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_plane_wave() {
        // One particle with amplitude e^{ikj}/√L on site j occupies k only.
        let l = 6;
        let b = SectorBasis::new(l);
        let q = periodic_momenta(l);
        let target = 2;
        let mut psi = vec![ZERO; b.dim()];
        for j in 0..l {
            psi[b.index_of(1 << j)] = Complex64::from_polar((l as f64).powf(-0.5), q[target] * (j + 1) as f64);
        }
        let c = all(&b, &psi);
        let occ = c.momentum_matrices().occupations();
        for (i, v) in occ.rho_p.iter().enumerate() {
            let want = if i == target { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "{i}: {v}");
        }
        assert!((c.current_over_j() - q[target].sin() / l as f64).abs() < 1e-12);
        assert!((c.energy_over_j() + q[target].cos() / l as f64).abs() < 1e-12);
    }

    #[test]
    fn product_state_matches_infinite_chain_correlator() {
        let l = 8;
        let theta = 0.3;
        let b = SectorBasis::new(l);
        let c = all(&b, &initial_spin_state(&b, theta));
        assert!(c.site_density().iter().all(|v| (v - theta.cos().powi(2)).abs() < 1e-12));
        let hop = (theta.cos() * theta.sin()).powi(2);
        assert!(c.bonds.iter().all(|v| (v - hop).norm() < 1e-12));
        assert!((c.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_bookkeeping_and_translation_invariance() {
        let l = 6;
        let b = SectorBasis::new(l);
        let psi = initial_spin_state(&b, FRAC_PI_4);
        let m = all(&b, &psi).momentum_matrices();
        let occ = m.occupations();
        assert!((occ.density() - 0.5).abs() < 1e-12);
        for a in 0..l {
            for q in 0..l {
                if a != q {
                    assert!(m.ap[a * l + q].norm() < 1e-12);
                    assert!(m.p[a * l + q].norm() < 1e-12);
                }
            }
        }
        assert!(occ.rho_tilde.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn density_matrix_path_agrees_with_pure_path() {
        let l = 4;
        let b = SectorBasis::new(l);
        let psi: Vec<Complex64> = (0..b.dim())
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()) * 0.25)
            .collect();
        let dim = b.dim();
        let mut rho = vec![ZERO; dim * dim];
        for a in 0..dim {
            for c in 0..dim {
                rho[a * dim + c] = psi[a] * psi[c].conj();
            }
        }
        let x = all(&b, &psi);
        let y = density_matrix_correlations(&b, &rho).unwrap();
        for (u, v) in x.even.iter().chain(&x.odd).zip(y.even.iter().chain(&y.odd)) {
            assert!((u - v).norm() < 1e-14);
        }
        assert!(density_matrix_correlations(&b, &rho[1..]).is_err());
    }

    #[test]
    fn momentum_grids() {
        let l = 4;
        let ap = antiperiodic_momenta(l);
        let p = periodic_momenta(l);
        let t = interleaved_momenta(l);
        for n in 0..l {
            assert!((ap[n] - TAU * (n as f64 + 0.5) / 4.0).abs() < 1e-15);
            assert!((p[n] - TAU * (n as f64 + 1.0) / 4.0).abs() < 1e-15);
            assert!((t[n] - 0.5 * (ap[n] + p[n])).abs() < 1e-15);
        }
    }
}
