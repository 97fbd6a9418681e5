//! Deterministic reductions over trajectories.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on
//! the thread pool, and chunk partials are combined with pairwise summation,
//! so sums are bit-identical for any number of threads.

use rayon::prelude::*;

/// Rows per reduction chunk.
pub const CHUNK: usize = 2048;

/// Pairwise (tree) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Elementwise pairwise summation of equal-length partial vectors.
pub fn pairwise_sum_vecs(parts: &[Vec<f64>], width: usize) -> Vec<f64> {
    match parts.len() {
        0 => vec![0.0; width],
        1 => parts[0].clone(),
        n => {
            let mid = n / 2;
            let mut left = pairwise_sum_vecs(&parts[..mid], width);
            let right = pairwise_sum_vecs(&parts[mid..], width);
            for (l, r) in left.iter_mut().zip(&right) {
                *l += r;
            }
            left
        }
    }
}

/// Sums `f(i)` for `i in 0..n` deterministically in parallel.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partials)
}

/// Vector-valued variant of [`par_sum`]: `f(i, acc)` adds row `i`'s
/// contribution into a chunk-local accumulator of length `width`.
pub fn par_sum_vec<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = vec![0.0; width];
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc
        })
        .collect();
    pairwise_sum_vecs(&partials, width)
}
