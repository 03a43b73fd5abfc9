//! Dense vector kernels shared by the solver and the analysis code.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added
//! in chunk order, so results are bitwise independent of the thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;

const CHUNK: usize = 8192;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(ys, xs)| {
            for (yi, xi) in ys.iter_mut().zip(xs) {
                *yi += alpha * xi;
            }
        });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|xs| {
        for xi in xs {
            *xi *= alpha;
        }
    });
}

/// Rows per block in the blocked products below.
const BLOCK_ROWS: usize = 512;

/// `G[i][j] = sum_r a_i[r] g[r] b_j[r]` (or with `g = 1`), reading every
/// vector once.
pub fn weighted_gram(a: &[Vec<f64>], b: &[Vec<f64>], weight: Option<&[f64]>) -> DMatrix<f64> {
    let (ka, kb) = (a.len(), b.len());
    if ka == 0 || kb == 0 {
        return DMatrix::zeros(ka, kb);
    }
    let n = a[0].len();
    let blocks = n.div_ceil(BLOCK_ROWS);
    let partial: Vec<DMatrix<f64>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * BLOCK_ROWS;
            let hi = (lo + BLOCK_ROWS).min(n);
            let rows = hi - lo;
            let ma = DMatrix::from_fn(rows, ka, |r, i| {
                let x = a[i][lo + r];
                match weight {
                    Some(g) => x * g[lo + r],
                    None => x,
                }
            });
            let mb = DMatrix::from_fn(rows, kb, |r, j| b[j][lo + r]);
            ma.transpose() * mb
        })
        .collect();
    let mut total = DMatrix::zeros(ka, kb);
    for p in partial {
        total += p;
    }
    total
}

/// Replaces `v[0..cols]` by `v[0..rows] * coeffs` in place, where `coeffs`
/// is `rows x cols` with `cols <= rows`.
pub fn rotate_in_place(v: &mut [Vec<f64>], coeffs: &DMatrix<f64>) {
    let (rows, cols) = coeffs.shape();
    assert!(cols <= rows && rows <= v.len());
    if rows == 0 {
        return;
    }
    let n = v[0].len();
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK_ROWS).min(n);
        let len = end - start;
        let block = DMatrix::from_fn(len, rows, |r, i| v[i][start + r]);
        let out = block * coeffs;
        for (j, vj) in v.iter_mut().enumerate().take(cols) {
            vj[start..end].copy_from_slice(out.column(j).as_slice());
        }
        start = end;
    }
}
