//! SSH-Hubbard operators in the composite Fock basis.
//!
//! Sites are flattened as `s = 2 (i - 1) + (m - 1)` for unit cell `i` and
//! sublattice `m`, so bond `(s, s + 1)` is intracell (`-v`) for even `s` and
//! intercell (`-w`) for odd `s`. Fermionic modes are ordered with all up
//! modes before all down modes, which makes
//! `H0 = hop (x) 1 + 1 (x) hop + U sum_s n_up(s) n_dn(s)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{hopping_parity, occupied_sites, FockBasis, SectorBasis, Word};
use crate::error::{Error, Result};

/// Geometry and couplings of an open SSH-Hubbard chain (atomic units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub sites: usize,
    /// Intracell hopping amplitude.
    pub v: f64,
    /// Intercell hopping amplitude.
    pub w: f64,
    /// On-site interaction.
    pub u: f64,
}

/// Lattice constant: two sites per cell, unit spacing. Only enters through
/// the site positions.
pub const LATTICE_CONSTANT: f64 = 2.0;

impl ChainSpec {
    pub fn new(sites: usize, v: f64, w: f64, u: f64) -> Result<Self> {
        let spec = Self { sites, v, w, u };
        spec.validate()?;
        Ok(spec)
    }

    /// The trivial phase used throughout (`v > w`).
    pub fn trivial(sites: usize, u: f64) -> Self {
        Self {
            sites,
            v: 0.18268,
            w: 0.10026,
            u,
        }
    }

    /// The topological phase used throughout (`w > v`).
    pub fn topological(sites: usize, u: f64) -> Self {
        Self {
            sites,
            v: 0.10026,
            w: 0.18268,
            u,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || !self.sites.is_multiple_of(2) {
            return Err(Error::param("N must be even"));
        }
        if self.sites > crate::basis::MAX_SITES {
            return Err(Error::param(format!("N = {} is too large", self.sites)));
        }
        for (name, x) in [("v", self.v), ("w", self.w), ("U", self.u)] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::param(format!(
                    "{name} must be finite and non-negative, got {x}"
                )));
            }
        }
        Ok(())
    }

    pub fn unit_cells(&self) -> usize {
        self.sites / 2
    }

    /// Hopping amplitude (with sign) of bond `(s, s + 1)`.
    #[inline]
    pub fn bond(&self, s: usize) -> f64 {
        if s.is_multiple_of(2) {
            -self.v
        } else {
            -self.w
        }
    }

    /// Site positions `x_s = s - (N - 1) / 2`, centered on the chain.
    pub fn positions(&self) -> Vec<f64> {
        let c = (self.sites as f64 - 1.0) / 2.0;
        (0..self.sites).map(|s| s as f64 - c).collect()
    }

    /// `N x N` one-body hopping matrix (row-major).
    pub fn one_body_matrix(&self) -> Vec<f64> {
        let n = self.sites;
        let mut m = vec![0.0; n * n];
        for s in 0..n - 1 {
            m[s * n + s + 1] = self.bond(s);
            m[(s + 1) * n + s] = self.bond(s);
        }
        m
    }
}

/// Real sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; columns are sorted and duplicates summed.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&(c as u32)) {
            Ok(i) => self.vals[span.start + i],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`, parallel over rows. Each row is summed in column order,
    /// so the result does not depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_chunks_mut(4096).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * 4096;
            for (i, yi) in ys.iter_mut().enumerate() {
                let r = base + i;
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * x[self.cols[k] as usize];
                }
                *yi = acc;
            }
        });
    }

    /// Largest `|A_rc - A_cr|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        (0..self.dim)
            .into_par_iter()
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (v - self.get(c, r)).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        (0..self.dim).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let (mut diag, mut off) = (0.0, 0.0);
            for (c, v) in self.row(r) {
                if c == r {
                    diag += v;
                } else {
                    off += v.abs();
                }
            }
            (lo.min(diag - off), hi.max(diag + off))
        })
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim * self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                d[r * self.dim + c] = v;
            }
        }
        d
    }

    /// Writes `row col value` triples, one per line, in row-major order.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        if self.dim > 10_000 {
            return Err(Error::param(format!(
                "operator dump is limited to dimension 10^4, got {}",
                self.dim
            )));
        }
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// Nearest-neighbour hopping of one spin species within `sector`.
pub fn single_spin_hopping(spec: &ChainSpec, sector: &SectorBasis) -> CsrMatrix {
    assert_eq!(
        spec.sites,
        sector.sites(),
        "sector built for a different chain"
    );
    let rows = sector
        .words()
        .iter()
        .map(|&word| {
            let mut row = Vec::new();
            for s in 0..spec.sites - 1 {
                let pair: Word = 0b11 << s;
                let occ = word & pair;
                if occ == 0 || occ == pair {
                    continue;
                }
                let target = word ^ pair;
                let sign = hopping_parity(word, s, s + 1);
                let col = sector.rank(target).expect("hop stays in sector");
                row.push((col as u32, spec.bond(s) * sign));
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(sector.dim(), rows)
}

/// `U` times the number of doubly occupied sites.
#[inline]
pub fn interaction_diagonal(spec: &ChainSpec, up: Word, dn: Word) -> f64 {
    spec.u * (up & dn).count_ones() as f64
}

/// Default ceiling on the assembled operator size.
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

/// Bytes needed to store `H0` for `spec` at half filling, estimated from the
/// per-sector hopping counts.
pub fn estimate_h0_bytes(basis: &FockBasis, hop_nnz: usize) -> usize {
    let d = basis.up.dim();
    let nnz = basis.dim() + 2 * hop_nnz * d;
    nnz * (std::mem::size_of::<u32>() + std::mem::size_of::<f64>())
        + (basis.dim() + 1) * std::mem::size_of::<usize>()
}

/// Field-free Hamiltonian at half filling.
pub fn assemble_h0(spec: &ChainSpec) -> Result<CsrMatrix> {
    assemble_h0_capped(spec, DEFAULT_MEMORY_CAP)
}

pub fn assemble_h0_capped(spec: &ChainSpec, memory_cap: usize) -> Result<CsrMatrix> {
    spec.validate()?;
    let basis = FockBasis::half_filling(spec.sites)?;
    let hop = single_spin_hopping(spec, &basis.up);
    let estimate = estimate_h0_bytes(&basis, hop.nnz());
    if estimate > memory_cap {
        return Err(Error::Resource(format!(
            "H0 for N = {} needs about {} MiB, above the {} MiB cap",
            spec.sites,
            estimate >> 20,
            memory_cap >> 20
        )));
    }
    Ok(assemble_from_parts(spec, &basis, &hop))
}

fn assemble_from_parts(spec: &ChainSpec, basis: &FockBasis, hop: &CsrMatrix) -> CsrMatrix {
    let d = basis.dn.dim();
    let n = basis.dim();
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let iu = r / d;
            let id = r % d;
            let mut row = Vec::with_capacity(1 + hop.max_row_nnz() * 2);
            row.push((
                r as u32,
                interaction_diagonal(spec, basis.up.unrank(iu), basis.dn.unrank(id)),
            ));
            for (ju, val) in hop.row(iu) {
                row.push(((ju * d + id) as u32, val));
            }
            for (jd, val) in hop.row(id) {
                row.push(((iu * d + jd) as u32, val));
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// Dipole operator `sum_s x_s (n_up(s) + n_dn(s))` as a diagonal.
pub fn assemble_dipole_diagonal(spec: &ChainSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let basis = FockBasis::half_filling(spec.sites)?;
    let x = spec.positions();
    let word_sum = |w: Word| occupied_sites(w).map(|s| x[s]).sum::<f64>();
    let up: Vec<f64> = basis.up.words().iter().map(|&w| word_sum(w)).collect();
    let dn: Vec<f64> = basis.dn.words().iter().map(|&w| word_sum(w)).collect();
    Ok(up
        .iter()
        .flat_map(|&a| dn.iter().map(move |&b| a + b))
        .collect())
}

/// A permutation with signs acting on basis vectors:
/// `(P x)[target[r]] = sign[r] * x[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPermutation {
    target: Vec<u32>,
    sign: Vec<i8>,
}

impl SignedPermutation {
    pub fn dim(&self) -> usize {
        self.target.len()
    }

    #[inline]
    pub fn image(&self, r: usize) -> (usize, f64) {
        (self.target[r] as usize, self.sign[r] as f64)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..x.len() {
            y[self.target[r] as usize] = self.sign[r] as f64 * x[r];
        }
    }

    /// `<x| P |x>`.
    pub fn expectation(&self, x: &[f64]) -> f64 {
        (0..x.len())
            .map(|r| x[self.target[r] as usize] * self.sign[r] as f64 * x[r])
            .sum()
    }

    pub fn is_involution(&self) -> bool {
        (0..self.dim()).all(|r| {
            let t = self.target[r] as usize;
            self.target[t] as usize == r && self.sign[t] * self.sign[r] == 1
        })
    }

    /// Projects `x` in place onto the `+1` (`even = true`) or `-1`
    /// eigenspace. Requires an involution; paired entries come out exactly
    /// equal up to the sign.
    pub fn project(&self, x: &mut [f64], even: bool) {
        let parity = if even { 1.0 } else { -1.0 };
        for r in 0..x.len() {
            let t = self.target[r] as usize;
            if t < r {
                continue;
            }
            let s = self.sign[r] as f64 * parity;
            if t == r {
                if s < 0.0 {
                    x[r] = 0.0;
                }
            } else {
                // x[r] -> (x[r] + s x[t]) / 2, x[t] = s x[r]
                let avg = 0.5 * (x[r] + s * x[t]);
                x[r] = avg;
                x[t] = s * avg;
            }
        }
    }

    /// Dimension of the `+1` or `-1` eigenspace.
    pub fn eigenspace_dim(&self, even: bool) -> usize {
        let want = if even { 1 } else { -1 };
        (0..self.dim())
            .filter(|&r| {
                let t = self.target[r] as usize;
                t > r || (t == r && self.sign[r] == want)
            })
            .count()
    }
}

/// Jordan-Wigner sign from re-sorting creation operators of one species
/// after the site map `f`.
fn reorder_sign(word: Word, f: impl Fn(usize) -> usize) -> i8 {
    let images: Vec<usize> = occupied_sites(word).map(f).collect();
    let mut inversions = 0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            if images[i] > images[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn map_word(word: Word, f: impl Fn(usize) -> usize) -> Word {
    occupied_sites(word).fold(0, |acc, s| acc | (1 << f(s)))
}

/// Spatial reflection `s -> N - 1 - s` on the half-filled composite basis.
pub fn reflection(spec: &ChainSpec) -> Result<SignedPermutation> {
    spec.validate()?;
    let basis = FockBasis::half_filling(spec.sites)?;
    let last = spec.sites - 1;
    let flip = |s: usize| last - s;
    let map_sector = |sector: &SectorBasis| -> Vec<(usize, i8)> {
        sector
            .words()
            .iter()
            .map(|&w| {
                let image = map_word(w, flip);
                (sector.rank(image).unwrap(), reorder_sign(w, flip))
            })
            .collect()
    };
    let up = map_sector(&basis.up);
    let dn = map_sector(&basis.dn);
    let d = basis.dn.dim();
    let mut target = Vec::with_capacity(basis.dim());
    let mut sign = Vec::with_capacity(basis.dim());
    for &(tu, su) in &up {
        for &(td, sd) in &dn {
            target.push((tu * d + td) as u32);
            sign.push(su * sd);
        }
    }
    Ok(SignedPermutation { target, sign })
}

/// Exchange of the up and down species on the half-filled composite basis.
pub fn spin_swap(spec: &ChainSpec) -> Result<SignedPermutation> {
    spec.validate()?;
    let basis = FockBasis::half_filling(spec.sites)?;
    let d = basis.dn.dim();
    let k = basis.up.particles();
    // moving k down creators past k up creators
    let s: i8 = if (k * k) % 2 == 0 { 1 } else { -1 };
    let target = (0..basis.dim())
        .map(|r| ((r % d) * d + r / d) as u32)
        .collect();
    Ok(SignedPermutation {
        target,
        sign: vec![s; basis.dim()],
    })
}
