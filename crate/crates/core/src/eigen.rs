//! Lowest eigenpairs of real symmetric operators.
//!
//! Large problems use thick-restart Lanczos with full reorthogonalization;
//! dimensions up to [`SolverOptions::dense_threshold`] are diagonalized
//! directly. When symmetries are supplied, each symmetry sector is solved on
//! its own in symmetry-adapted coordinates, so every returned vector is an
//! exact symmetry eigenstate and dipole matrix elements between states of
//! equal reflection parity vanish to rounding.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, rotate_in_place, scale, weighted_gram};
use crate::operators::{CsrMatrix, SignedPermutation};

/// A real symmetric operator that can be applied to vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Number of lowest eigenpairs.
    pub k: usize,
    /// Residual tolerance `||H u - e u||`.
    pub tol: f64,
    /// Seed of the pseudo-random starting vector.
    pub seed: u64,
    /// Problems up to this full dimension are diagonalized densely, sector
    /// by sector.
    pub dense_threshold: usize,
    /// Krylov basis size; `None` picks `2 k + 20`.
    pub krylov_dim: Option<usize>,
    /// Cap on thick restarts.
    pub max_restarts: usize,
    /// Energies closer than this form a degeneracy cluster.
    pub cluster_gap: f64,
    /// Highest Chebyshev filter degree for large sectors; 0 disables
    /// filtering.
    pub filter_degree: usize,
    /// Sectors at least this large are filtered.
    pub filter_min_dim: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k: 200,
            tol: 1e-9,
            seed: 20240917,
            dense_threshold: 2000,
            krylov_dim: None,
            max_restarts: 400,
            cluster_gap: 1e-6,
            filter_degree: 40,
            filter_min_dim: 50_000,
        }
    }
}

impl SolverOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Lowest eigenpairs in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Explicit residual norms `||H u_j - e_j u_j||`.
    pub residuals: Vec<f64>,
    /// Degeneracy-cluster id per state; ids increase with energy.
    pub clusters: Vec<usize>,
    /// Eigenvalue (`+1`/`-1`) of each resolved symmetry, per state, in the
    /// order the symmetries were given. Empty rows without symmetries.
    pub characters: Vec<Vec<i8>>,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Eigenvalue of the first resolved symmetry (the reflection, by
    /// convention) per state.
    pub fn parities(&self) -> Option<Vec<i8>> {
        self.characters.iter().map(|c| c.first().copied()).collect()
    }

    /// Keeps the lowest `k` pairs.
    pub fn truncate(&mut self, k: usize) {
        self.energies.truncate(k);
        self.vectors.truncate(k);
        self.residuals.truncate(k);
        self.clusters.truncate(k);
        self.characters.truncate(k);
    }

    /// Members of each degeneracy cluster with more than one state.
    pub fn degenerate_clusters(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &c) in self.clusters.iter().enumerate() {
            match out.last_mut() {
                Some(last) if self.clusters[last[0]] == c => last.push(i),
                _ => out.push(vec![i]),
            }
        }
        out.retain(|c| c.len() > 1);
        out
    }
}

/// Orthonormal coordinates of one joint eigenspace of commuting signed
/// permutation involutions.
///
/// Basis vector `o` is the normalized projection of a unit vector onto the
/// eigenspace; it is supported on one orbit of the generated group, listed
/// in `members[ptr[o]..ptr[o + 1]]` with matching `coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySector {
    full_dim: usize,
    identity: bool,
    ptr: Vec<usize>,
    members: Vec<u32>,
    coeffs: Vec<f64>,
    characters: Vec<i8>,
}

impl SymmetrySector {
    /// The whole space.
    pub fn full(n: usize) -> Self {
        Self {
            full_dim: n,
            identity: true,
            ptr: (0..=n).collect(),
            members: (0..n as u32).collect(),
            coeffs: vec![1.0; n],
            characters: Vec::new(),
        }
    }

    /// Joint eigenspace with eigenvalue `characters[i]` of `symmetries[i]`.
    pub fn new(symmetries: &[&SignedPermutation], characters: &[i8]) -> Result<Self> {
        if symmetries.len() != characters.len() {
            return Err(Error::param("one character per symmetry is required"));
        }
        let Some(first) = symmetries.first() else {
            return Err(Error::param("no symmetries given"));
        };
        let n = first.dim();
        check_symmetries(symmetries)?;
        if characters.iter().any(|c| c.abs() != 1) {
            return Err(Error::param("characters must be +1 or -1"));
        }
        let g = symmetries.len();
        let mut visited = vec![false; n];
        let mut ptr = vec![0];
        let mut members = Vec::new();
        let mut coeffs = Vec::new();
        let mut orbit: Vec<(usize, f64)> = Vec::with_capacity(1 << g);
        for r in 0..n {
            if visited[r] {
                continue;
            }
            orbit.clear();
            for mask in 0..1usize << g {
                let (mut t, mut s) = (r, 1.0);
                let mut chi = 1.0;
                for (i, sym) in symmetries.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        let (t2, s2) = sym.image(t);
                        t = t2;
                        s *= s2;
                        chi *= characters[i] as f64;
                    }
                }
                visited[t] = true;
                match orbit.iter_mut().find(|(u, _)| *u == t) {
                    Some(entry) => entry.1 += chi * s,
                    None => orbit.push((t, chi * s)),
                }
            }
            // coefficients are small integers before normalization
            orbit.retain(|&(_, c)| c.abs() > 0.5);
            if orbit.is_empty() {
                continue;
            }
            orbit.sort_by_key(|&(t, _)| t);
            let scale = 1.0 / orbit.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
            for &(t, c) in &orbit {
                members.push(t as u32);
                coeffs.push(c * scale);
            }
            ptr.push(members.len());
        }
        Ok(Self {
            full_dim: n,
            identity: false,
            ptr,
            members,
            coeffs,
            characters: characters.to_vec(),
        })
    }

    /// Every joint eigenspace, characters in lexicographic order with `+1`
    /// first; empty sectors are dropped.
    pub fn all(symmetries: &[&SignedPermutation]) -> Result<Vec<Self>> {
        let g = symmetries.len();
        let mut out = Vec::with_capacity(1 << g);
        for code in 0..1usize << g {
            let chars: Vec<i8> = (0..g)
                .map(|i| if code >> (g - 1 - i) & 1 == 0 { 1 } else { -1 })
                .collect();
            let sector = Self::new(symmetries, &chars)?;
            if sector.dim() > 0 {
                out.push(sector);
            }
        }
        Ok(out)
    }

    /// Number of sector coordinates.
    pub fn dim(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn characters(&self) -> &[i8] {
        &self.characters
    }

    /// Full-space vector with sector coordinates `a`.
    pub fn expand(&self, a: &[f64], x: &mut [f64]) {
        if self.identity {
            x.copy_from_slice(a);
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        for (o, &ao) in a.iter().enumerate() {
            for i in self.ptr[o]..self.ptr[o + 1] {
                x[self.members[i] as usize] = self.coeffs[i] * ao;
            }
        }
    }

    /// Sector coordinates of the projection of `x`.
    pub fn contract(&self, x: &[f64], a: &mut [f64]) {
        if self.identity {
            a.copy_from_slice(x);
            return;
        }
        a.par_chunks_mut(4096).enumerate().for_each(|(blk, chunk)| {
            for (j, ao) in chunk.iter_mut().enumerate() {
                let o = blk * 4096 + j;
                *ao = (self.ptr[o]..self.ptr[o + 1])
                    .map(|i| self.coeffs[i] * x[self.members[i] as usize])
                    .sum();
            }
        });
    }
}

fn check_symmetries(symmetries: &[&SignedPermutation]) -> Result<()> {
    let n = symmetries[0].dim();
    for (i, a) in symmetries.iter().enumerate() {
        if a.dim() != n {
            return Err(Error::param("symmetries act on different dimensions"));
        }
        if !a.is_involution() {
            return Err(Error::param("symmetries must be involutions"));
        }
        for b in &symmetries[..i] {
            let commute = (0..n).all(|r| {
                let (ta, sa) = a.image(r);
                let (tab, sab) = b.image(ta);
                let (tb, sb) = b.image(r);
                let (tba, sba) = a.image(tb);
                tab == tba && sa * sab == sb * sba
            });
            if !commute {
                return Err(Error::param("symmetries must commute"));
            }
        }
    }
    Ok(())
}

/// `H` restricted to a symmetry sector, in sector coordinates.
struct Restricted<'a> {
    h: &'a CsrMatrix,
    sector: &'a SymmetrySector,
}

impl LinearOperator for Restricted<'_> {
    fn dim(&self) -> usize {
        self.sector.dim()
    }

    fn apply(&self, a: &[f64], y: &mut [f64]) {
        if self.sector.identity {
            self.h.matvec(a, y);
            return;
        }
        let n = self.sector.full_dim;
        let mut x = vec![0.0; n];
        let mut hx = vec![0.0; n];
        self.sector.expand(a, &mut x);
        self.h.matvec(&x, &mut hx);
        self.sector.contract(&hx, y);
    }
}

/// Lowest `opts.k` eigenpairs of `h` without symmetry resolution.
pub fn lowest_eigenpairs(h: &CsrMatrix, opts: &SolverOptions) -> Result<EigenSolution> {
    let n = h.dim();
    check_k(opts.k, n)?;
    let sector = SymmetrySector::full(n);
    let op = Restricted { h, sector: &sector };
    let raw = solve_sector(&op, h, opts.k, opts, opts.seed)?;
    finish(h, vec![(raw, &sector)], opts)
}

/// Lowest `opts.k` eigenpairs of `h`, solved separately in the even and
/// odd sectors of `reflection`, which must commute with `h`.
pub fn lowest_eigenpairs_by_parity(
    h: &CsrMatrix,
    reflection: &SignedPermutation,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    lowest_eigenpairs_by_symmetry(h, &[reflection], opts)
}

/// Lowest `opts.k` eigenpairs of `h`, solved separately in every joint
/// eigenspace of `symmetries` (commuting involutions that commute with `h`).
pub fn lowest_eigenpairs_by_symmetry(
    h: &CsrMatrix,
    symmetries: &[&SignedPermutation],
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    let n = h.dim();
    check_k(opts.k, n)?;
    if symmetries.is_empty() {
        return lowest_eigenpairs(h, opts);
    }
    if symmetries.iter().any(|s| s.dim() != n) {
        return Err(Error::param("symmetry and operator dimensions differ"));
    }
    let sectors = SymmetrySector::all(symmetries)?;
    let count = sectors.len();
    let dims: Vec<usize> = sectors.iter().map(SymmetrySector::dim).collect();
    let margin = (opts.k / 10).max(4);
    let mut want: Vec<usize> = dims
        .iter()
        .map(|&d| (opts.k.div_ceil(count) + margin).min(d))
        .collect();
    let mut solved: Vec<Option<RawPairs>> = (0..count).map(|_| None).collect();
    loop {
        for s in 0..count {
            let stale = solved[s].as_ref().is_none_or(|r| r.values.len() < want[s]);
            if stale {
                solved[s] = None;
                let seed = opts.seed.wrapping_add(s as u64);
                let op = Restricted {
                    h,
                    sector: &sectors[s],
                };
                solved[s] = Some(solve_sector(&op, h, want[s], opts, seed)?);
            }
        }
        // Every state missing from a sector lies above that sector's top
        // computed energy; the merge is complete once each top reaches the
        // k-th merged energy.
        let mut merged: Vec<f64> = solved
            .iter()
            .flat_map(|r| r.as_ref().unwrap().values.iter().copied())
            .collect();
        merged.sort_by(f64::total_cmp);
        let kth = merged[opts.k - 1];
        let mut done = true;
        for s in 0..count {
            let r = solved[s].as_ref().unwrap();
            let exhausted = r.values.len() >= dims[s];
            let top = r.values.last().copied().unwrap_or(f64::NEG_INFINITY);
            if !exhausted && top < kth {
                let missing = merged.iter().filter(|&&e| e <= kth).count()
                    - r.values.iter().filter(|&&e| e <= kth).count();
                want[s] = (want[s] + missing.max(margin) + margin).min(dims[s]);
                done = false;
            }
        }
        if done {
            break;
        }
    }
    let parts = solved
        .into_iter()
        .zip(&sectors)
        .map(|(r, s)| (r.unwrap(), s))
        .collect();
    finish(h, parts, opts)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds the dimension {n}")));
    }
    Ok(())
}

#[derive(Debug, Default)]
struct RawPairs {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn dense_sector(op: &dyn LinearOperator, k: usize) -> RawPairs {
    let m = op.dim();
    let mut x = vec![0.0; m];
    let mut proj = DMatrix::zeros(m, m);
    let mut y = vec![0.0; m];
    for b in 0..m {
        x[b] = 1.0;
        op.apply(&x, &mut y);
        proj.column_mut(b).copy_from_slice(&y);
        x[b] = 0.0;
    }
    // symmetrize rounding
    let proj = (&proj + proj.transpose()) * 0.5;
    let (values, z) = sorted_eigen(proj);
    let k = k.min(m);
    RawPairs {
        values: values[..k].to_vec(),
        vectors: (0..k)
            .map(|i| z.column(i).iter().copied().collect())
            .collect(),
    }
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Classical Gram-Schmidt of `w` against `basis`, repeated while a pass
/// removes most of the norm (at most three passes). Returns the removed
/// coefficients, summed over passes, and the final norm.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> (Vec<f64>, f64) {
    let mut total = vec![0.0; basis.len()];
    let mut before = norm(w);
    for _ in 0..3 {
        let coeffs: Vec<f64> = basis.par_iter().map(|v| dot(v, w)).collect();
        for ((v, c), t) in basis.iter().zip(&coeffs).zip(&mut total) {
            axpy(-c, v, w);
            *t += c;
        }
        let after = norm(w);
        if after > 0.7 * before {
            return (total, after);
        }
        before = after;
    }
    (total, norm(w))
}

/// Largest filter value allowed at the ground-state estimate; bounds the
/// dynamic range of the filtered spectrum.
const FILTER_DYNAMIC_RANGE: f64 = 1e6;

/// `-T_d((c - H) / e)`: maps the spectrum above `c - e` into `[-1, 1]` and
/// everything below it to large negative values, monotonically.
struct ChebyshevFilter<'a> {
    h: &'a dyn LinearOperator,
    degree: usize,
    center: f64,
    half_width: f64,
}

impl LinearOperator for ChebyshevFilter<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let (c, e) = (self.center, self.half_width);
        let mut prev = x.to_vec();
        let mut cur = vec![0.0; n];
        let mut next = vec![0.0; n];
        // T_1
        self.h.apply(x, &mut cur);
        cur.par_iter_mut()
            .zip(x.par_iter())
            .for_each(|(ci, xi)| *ci = (c * xi - *ci) / e);
        for _ in 1..self.degree {
            self.h.apply(&cur, &mut next);
            next.par_iter_mut()
                .zip(cur.par_iter().zip(prev.par_iter()))
                .for_each(|(ni, (ci, pi))| *ni = 2.0 * (c * ci - *ni) / e - pi);
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        y.par_iter_mut()
            .zip(cur.par_iter())
            .for_each(|(yi, ci)| *yi = -ci);
    }
}

fn trace_enabled() -> bool {
    std::env::var_os("SSHHUB_TRACE").is_some()
}

/// Lowest `k` pairs of `op` in its own coordinates. `full` is the
/// unrestricted operator, used only for a spectral upper bound.
fn solve_sector(
    op: &dyn LinearOperator,
    full: &CsrMatrix,
    k: usize,
    opts: &SolverOptions,
    seed: u64,
) -> Result<RawPairs> {
    let space = op.dim();
    if space == 0 || k == 0 {
        return Ok(RawPairs::default());
    }
    if full.dim() <= opts.dense_threshold {
        return Ok(dense_sector(op, k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = opts.krylov_dim.unwrap_or(2 * k + 20).max(k + 2);
    if m >= space {
        return Ok(dense_sector(op, k));
    }
    if opts.filter_degree == 0 || space < opts.filter_min_dim {
        return krylov_schur(op, op, k, m, opts, None, &mut rng);
    }

    // One unrestarted pass bounds the spectrum: Ritz values interlace, so
    // the (k + margin)-th one lies above the eigenvalue of the same rank.
    let probe = krylov_pass(op, m, &mut rng)?;
    let margin = (k / 10).max(4);
    let cutoff = probe.values[(k + margin).min(probe.values.len() - 1)];
    let (_, upper) = full.gershgorin_bounds();
    let center = 0.5 * (cutoff + upper);
    let half_width = 0.5 * (upper - cutoff);
    let x0 = ((probe.values[0] - center) / half_width).abs();
    let degree =
        ((FILTER_DYNAMIC_RANGE.acosh() / x0.acosh()).floor() as usize).clamp(2, opts.filter_degree);
    if trace_enabled() {
        eprintln!(
            "filter: dim {space} cutoff {cutoff:.6} upper {upper:.4} degree {degree} (lowest Ritz {:.8})",
            probe.values[0]
        );
    }
    let filter = ChebyshevFilter {
        h: op,
        degree,
        center,
        half_width,
    };
    krylov_schur(&filter, op, k, m, opts, Some(probe.start), &mut rng)
}

/// Result of a single unrestarted Lanczos pass: ascending Ritz values and
/// the sum of the lowest Ritz vectors as a starting vector.
struct Probe {
    values: Vec<f64>,
    start: Vec<f64>,
}

fn krylov_pass(op: &dyn LinearOperator, m: usize, rng: &mut ChaCha8Rng) -> Result<Probe> {
    let n = op.dim();
    let mut basis = vec![fresh_vector(n, &[], rng)?];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut w = vec![0.0; n];
    for j in 0..m {
        op.apply(&basis[j], &mut w);
        let (coeffs, beta) = orthogonalize(&basis, &mut w);
        for (i, c) in coeffs.iter().enumerate() {
            t[(i, j)] = *c;
            t[(j, i)] = *c;
        }
        if j + 1 == m {
            break;
        }
        if beta <= 1e-10 * t[(j, j)].abs().max(1.0) {
            let v = fresh_vector(n, &basis, rng)?;
            basis.push(v);
            continue;
        }
        t[(j, j + 1)] = beta;
        t[(j + 1, j)] = beta;
        let mut next = std::mem::replace(&mut w, vec![0.0; n]);
        scale(1.0 / beta, &mut next);
        basis.push(next);
    }
    let (values, y) = sorted_eigen(t);
    let wanted = (m / 2).max(1);
    let coeffs = DMatrix::from_fn(m, 1, |r, _| (0..wanted).map(|i| y[(r, i)]).sum());
    rotate_in_place(&mut basis, &coeffs);
    let mut start = basis.swap_remove(0);
    scale(1.0 / norm(&start), &mut start);
    Ok(Probe { values, start })
}

fn fresh_vector(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    for _ in 0..4 {
        let mut v = random_vector(n, rng);
        let nv = norm(&v);
        if nv == 0.0 {
            continue;
        }
        scale(1.0 / nv, &mut v);
        let (_, r) = orthogonalize(basis, &mut v);
        if r > 1e-8 {
            scale(1.0 / r, &mut v);
            return Ok(v);
        }
    }
    Err(Error::Resource(
        "Lanczos could not extend an exhausted Krylov space".into(),
    ))
}

/// Eigendecomposition of a symmetric matrix, ascending.
///
/// The QR result is polished by Jacobi sweeps on `Y^T T Y`; the QR
/// iteration alone occasionally leaves residuals far above rounding.
pub(crate) fn sorted_eigen(t: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = t.nrows();
    let eig = SymmetricEigen::new(t.clone());
    let mut y = eig.eigenvectors;
    let mut a = y.transpose() * &t * &y;
    jacobi_polish(&mut a, &mut y);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let y = DMatrix::from_fn(m, m, |r, c| y[(r, order[c])]);
    (values, y)
}

/// Cyclic Jacobi rotations on the nearly diagonal symmetric `a`,
/// accumulated into the columns of `y`.
fn jacobi_polish(a: &mut DMatrix<f64>, y: &mut DMatrix<f64>) {
    let m = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for _ in 0..30 {
        let mut rotated = false;
        for q in 1..m {
            for p in 0..q {
                let apq = 0.5 * (a[(p, q)] + a[(q, p)]);
                if apq.abs() <= 1e-14 * scale {
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let tan = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let tan = if theta == 0.0 { 1.0 } else { tan };
                let c = 1.0 / (tan * tan + 1.0).sqrt();
                let s = tan * c;
                for k in 0..m {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..m {
                    let (ykp, ykq) = (y[(k, p)], y[(k, q)]);
                    y[(k, p)] = c * ykp - s * ykq;
                    y[(k, q)] = s * ykp + c * ykq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Thick-restart Lanczos on `op` for its `k` lowest eigenpairs, followed by
/// a Rayleigh-Ritz step with `h` itself. `op` must share eigenvectors with
/// `h` and order the wanted ones lowest.
fn krylov_schur(
    op: &dyn LinearOperator,
    h: &dyn LinearOperator,
    k: usize,
    m: usize,
    opts: &SolverOptions,
    start: Option<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<RawPairs> {
    let n = h.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(match start {
        Some(v) => v,
        None => fresh_vector(n, &[], rng)?,
    });
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut begin = 0;
    let mut w = vec![0.0; n];
    let mut last_residuals = Vec::new();
    // relative accuracy demanded of the Ritz pairs of `op`
    let mut eta = 0.1 * opts.tol;

    for restart in 0..=opts.max_restarts {
        let mut coupling = 0.0;
        for j in begin..m {
            op.apply(&basis[j], &mut w);
            // the full projection column keeps T equal to V^T op V
            let (coeffs, beta) = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                t[(i, j)] = *c;
                t[(j, i)] = *c;
            }
            let alpha = coeffs[j];
            if j + 1 == n {
                break;
            }
            if beta <= 1e-10 * alpha.abs().max(1.0) {
                // invariant subspace: continue from a fresh orthogonal direction
                let v = fresh_vector(n, &basis, rng)?;
                basis.push(v);
                continue;
            }
            let mut next = std::mem::replace(&mut w, vec![0.0; n]);
            scale(1.0 / beta, &mut next);
            if j + 1 < m {
                t[(j, j + 1)] = beta;
                t[(j + 1, j)] = beta;
            } else {
                coupling = beta;
            }
            basis.push(next);
        }

        let (theta, y) = sorted_eigen(t.clone());
        let estimates: Vec<f64> = (0..m).map(|i| (coupling * y[(m - 1, i)]).abs()).collect();
        let converged = (0..k).all(|i| estimates[i] <= eta * theta[i].abs().max(1.0));
        if trace_enabled() {
            let worst = (0..k)
                .map(|i| estimates[i] / theta[i].abs().max(1.0))
                .fold(0.0f64, f64::max);
            eprintln!("restart {restart}: m={m} k={k} worst relative estimate {worst:.2e}");
        }

        if converged || m == n {
            // A few extra Ritz vectors keep near-degenerate pairs at the
            // boundary of the wanted block intact.
            let block = (k + (k / 10).max(4)).min(m);
            basis.truncate(m);
            let coeffs = y.columns(0, block).into_owned();
            rotate_in_place(&mut basis, &coeffs);
            basis.truncate(block);
            let (mut values, mut residuals) = rayleigh_ritz(h, &mut basis);
            basis.truncate(k);
            values.truncate(k);
            residuals.truncate(k);
            if trace_enabled() {
                let worst = residuals.iter().fold(0.0f64, |a, &b| a.max(b));
                eprintln!("rayleigh-ritz: worst residual {worst:.2e}");
            }
            if residuals.iter().all(|&r| r <= opts.tol) || m == n {
                return Ok(RawPairs {
                    values,
                    vectors: basis,
                });
            }
            last_residuals = residuals;
            eta *= 0.01;
            if eta < 1e-16 {
                break;
            }
            // Start over from the combined block; it already holds most of
            // the wanted directions.
            let mut v = basis.iter().fold(vec![0.0; n], |mut acc, b| {
                axpy(1.0, b, &mut acc);
                acc
            });
            scale(1.0 / norm(&v), &mut v);
            basis.clear();
            basis.push(v);
            t.fill(0.0);
            begin = 0;
            continue;
        }

        // Thick restart: keep the lowest Ritz vectors plus the residual
        // direction, which couples to them through the last Ritz components.
        let keep = (k + (m - k) / 2).min(m - 1);
        let residual = basis.pop().expect("residual vector");
        let coeffs = y.columns(0, keep).into_owned();
        rotate_in_place(&mut basis, &coeffs);
        basis.truncate(keep);
        basis.push(residual);
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
            let c = coupling * y[(m - 1, i)];
            t[(i, keep)] = c;
            t[(keep, i)] = c;
        }
        begin = keep;
        last_residuals = estimates[..k].to_vec();
    }
    Err(Error::NoConvergence {
        iterations: opts.max_restarts,
        residuals: last_residuals,
    })
}

/// Diagonalizes `h` within the span of `vectors` (orthonormal), rotating
/// them into Ritz vectors. Returns ascending Ritz values and explicit
/// residual norms.
fn rayleigh_ritz(h: &dyn LinearOperator, vectors: &mut [Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    const BATCH: usize = 16;
    let k = vectors.len();
    let n = h.dim();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for lo in (0..k).step_by(BATCH) {
        let hi = (lo + BATCH).min(k);
        let hv: Vec<Vec<f64>> = (lo..hi)
            .map(|i| {
                let mut y = vec![0.0; n];
                h.apply(&vectors[i], &mut y);
                y
            })
            .collect();
        let block = weighted_gram(vectors, &hv, None);
        g.columns_mut(lo, hi - lo).copy_from(&block);
    }
    let g = (&g + g.transpose()) * 0.5;
    let (values, z) = sorted_eigen(g);
    rotate_in_place(vectors, &z);
    let mut hv = vec![0.0; n];
    let residuals = vectors
        .iter_mut()
        .zip(&values)
        .map(|(v, &e)| {
            scale(1.0 / norm(v), v);
            h.apply(v, &mut hv);
            axpy(-e, v, &mut hv);
            norm(&hv)
        })
        .collect();
    (values, residuals)
}

/// Sorts, expands to the full space, fixes signs, assigns clusters and
/// measures residuals.
fn finish(
    h: &CsrMatrix,
    parts: Vec<(RawPairs, &SymmetrySector)>,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    let mut entries: Vec<(f64, Vec<f64>, usize)> = Vec::new();
    let sectors: Vec<&SymmetrySector> = parts.iter().map(|(_, s)| *s).collect();
    for (idx, (raw, _)) in parts.into_iter().enumerate() {
        for (e, v) in raw.values.into_iter().zip(raw.vectors) {
            entries.push((e, v, idx));
        }
    }
    // sector order (even first) among exact ties
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    entries.truncate(opts.k);

    let mut clusters = Vec::with_capacity(entries.len());
    let mut id = 0;
    for i in 0..entries.len() {
        if i > 0 && entries[i].0 - entries[i - 1].0 >= opts.cluster_gap {
            id += 1;
        }
        clusters.push(id);
    }

    let energies: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let origin: Vec<usize> = entries.iter().map(|e| e.2).collect();
    let mut reduced: Vec<Vec<f64>> = entries.into_iter().map(|e| e.1).collect();

    // Re-orthonormalize within each cluster and sector.
    let mut i = 0;
    while i < reduced.len() {
        let mut j = i + 1;
        while j < reduced.len() && clusters[j] == clusters[i] {
            j += 1;
        }
        for a in i..j {
            for b in i..a {
                if origin[a] == origin[b] {
                    let (lo, hi) = reduced.split_at_mut(a);
                    let c = dot(&lo[b], &hi[0]);
                    axpy(-c, &lo[b], &mut hi[0]);
                }
            }
            let nv = norm(&reduced[a]);
            scale(1.0 / nv, &mut reduced[a]);
        }
        i = j;
    }

    let n = h.dim();
    let mut vectors = Vec::with_capacity(reduced.len());
    for (a, &s) in reduced.into_iter().zip(&origin) {
        let mut v = vec![0.0; n];
        sectors[s].expand(&a, &mut v);
        fix_sign(&mut v);
        vectors.push(v);
    }

    let mut hv = vec![0.0; n];
    let residuals: Vec<f64> = vectors
        .iter()
        .zip(&energies)
        .map(|(v, &e)| {
            h.matvec(v, &mut hv);
            axpy(-e, v, &mut hv);
            norm(&hv)
        })
        .collect();

    // Dense results are exact to rounding; Lanczos results are held to tol.
    let limit = opts.tol.max(1e-10);
    if residuals.iter().any(|&r| r > 10.0 * limit) {
        return Err(Error::NoConvergence {
            iterations: opts.max_restarts,
            residuals,
        });
    }

    Ok(EigenSolution {
        energies,
        vectors,
        residuals,
        clusters,
        characters: origin
            .iter()
            .map(|&s| sectors[s].characters.clone())
            .collect(),
    })
}

/// Makes the largest-magnitude component positive (first index on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        scale(-1.0, v);
    }
}
