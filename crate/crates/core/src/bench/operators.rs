use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spin-basis states ordered by particle number (number of up spins), then
/// by bit pattern. Bit `j` set means site `j + 1` is up.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    sites: usize,
    states: Vec<u32>,
    index: Vec<u32>,
    offsets: Vec<usize>,
}

impl SectorBasis {
    pub fn new(sites: usize) -> Self {
        let dim = 1usize << sites;
        let mut states: Vec<u32> = (0..dim as u32).collect();
        states.sort_by_key(|s| (s.count_ones(), *s));
        let mut index = vec![0u32; dim];
        for (i, s) in states.iter().enumerate() {
            index[*s as usize] = i as u32;
        }
        let mut offsets = vec![0usize; sites + 2];
        for s in &states {
            offsets[s.count_ones() as usize + 1] += 1;
        }
        for n in 1..offsets.len() {
            offsets[n] += offsets[n - 1];
        }
        Self {
            sites,
            states,
            index,
            offsets,
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Bit pattern of basis element `i`.
    pub fn state(&self, i: usize) -> u32 {
        self.states[i]
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Basis position of a bit pattern.
    pub fn index_of(&self, pattern: u32) -> usize {
        self.index[pattern as usize] as usize
    }

    /// Index range of the sector with `n` up spins.
    pub fn sector(&self, n: usize) -> Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    /// Index range covering sectors `lo..=hi`.
    pub fn sectors(&self, lo: usize, hi: usize) -> Range<usize> {
        self.offsets[lo]..self.offsets[hi + 1]
    }

    /// Converts amplitudes from sector order to plain bit-pattern order.
    pub fn to_pattern_order(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; psi.len()];
        for (i, a) in psi.iter().enumerate() {
            out[self.states[i] as usize] = *a;
        }
        out
    }

    pub fn from_pattern_order(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.states.iter().map(|s| psi[*s as usize]).collect()
    }
}

/// Compressed-sparse-row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds from triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[p] != ZERO {
                    col_idx.push(self.col_idx[p]);
                    values.push(self.values[p]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|e| e.0 == c).map_or(ZERO, |e| e.1)
    }

    pub fn matvec(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `out = A[rows, rows] x` for a diagonal block that no entry leaves;
    /// `x` and `out` are indexed relative to `rows.start`.
    pub fn matvec_block(&self, rows: Range<usize>, x: &[Complex64], out: &mut [Complex64]) {
        let base = rows.start;
        for (o, r) in out.iter_mut().zip(rows) {
            let mut acc = ZERO;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p] - base];
            }
            *o = acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let entries = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v.conj())))
            .collect();
        Self::from_triplets(self.cols, self.rows, entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![ZERO; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// Largest entrywise deviation from `A = A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (v - self.get(c, r).conj()).norm()))
            .fold(0.0, f64::max)
    }
}

/// Hamiltonian, jump operators and the non-Hermitian effective Hamiltonian of
/// the lossy periodic chain, in [`SectorBasis`] order.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub basis: SectorBasis,
    /// `H = -J/2 Σ_j (S⁺_{j+1} S⁻_j + h.c.)`, site `L + 1 ≡ 1`.
    pub hamiltonian: CsrMatrix,
    /// `L_j = S⁻_j + e^{iφ} S⁻_{j+1}`.
    pub jumps: Vec<CsrMatrix>,
    /// `H - (iκ/2) Σ_j L_j† L_j`.
    pub effective: CsrMatrix,
}

pub(crate) fn check_sites(sites: usize) -> Result<()> {
    if (4..=14).contains(&sites) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "L",
            value: sites as f64,
            constraint: "4 <= L <= 14",
        })
    }
}

pub fn build_operators(sites: usize, j: f64, kappa: f64, phi: f64) -> Result<SpinOperators> {
    check_sites(sites)?;
    let basis = SectorBasis::new(sites);
    let dim = basis.dim();
    let next = |site: usize| (site + 1) % sites;
    let e_phi = Complex64::from_polar(1.0, phi);
    let hop = Complex64::new(-0.5 * j, 0.0);
    // Σ L†L = 2N + Σ_j (e^{iφ} S⁺_j S⁻_{j+1} + e^{-iφ} S⁺_{j+1} S⁻_j).
    let loss_fwd = Complex64::new(0.0, -0.5 * kappa) * e_phi;
    let loss_bwd = Complex64::new(0.0, -0.5 * kappa) * e_phi.conj();

    let mut h = Vec::new();
    let mut h_eff = Vec::new();
    for col in 0..dim {
        let s = basis.state(col);
        h_eff.push((col, col, Complex64::new(0.0, -kappa * s.count_ones() as f64)));
        for site in 0..sites {
            let (a, b) = (1u32 << site, 1u32 << next(site));
            let (up_a, up_b) = (s & a != 0, s & b != 0);
            if up_a == up_b {
                continue;
            }
            let row = basis.index_of(s ^ a ^ b);
            h.push((row, col, hop));
            // up_b: particle moves from site+1 to site, i.e. S⁺_j S⁻_{j+1}.
            let loss = if up_b { loss_fwd } else { loss_bwd };
            h_eff.push((row, col, hop + loss));
        }
    }

    let jumps = (0..sites)
        .map(|site| {
            let mut entries = Vec::new();
            for col in 0..dim {
                let s = basis.state(col);
                for (bit, coef) in [(1u32 << site, Complex64::new(1.0, 0.0)), (1u32 << next(site), e_phi)] {
                    if s & bit != 0 {
                        entries.push((basis.index_of(s ^ bit), col, coef));
                    }
                }
            }
            CsrMatrix::from_triplets(dim, dim, entries)
        })
        .collect();

    Ok(SpinOperators {
        hamiltonian: CsrMatrix::from_triplets(dim, dim, h),
        effective: CsrMatrix::from_triplets(dim, dim, h_eff),
        jumps,
        basis,
    })
}

/// Product state `⊗_j (cos θ |↑⟩ + sin θ |↓⟩)` in sector order.
pub fn initial_spin_state(basis: &SectorBasis, theta: f64) -> Vec<Complex64> {
    let (c, s) = (theta.cos(), theta.sin());
    let sites = basis.sites() as i32;
    basis
        .states()
        .iter()
        .map(|p| {
            let up = p.count_ones() as i32;
            Complex64::new(c.powi(up) * s.powi(sites - up), 0.0)
        })
        .collect()
}
