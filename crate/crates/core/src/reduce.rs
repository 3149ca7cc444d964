//! Order-stable reductions.
//!
//! Row-wise work is split into fixed-size blocks whose partial results are
//! combined by a pairwise tree. The block boundaries never depend on the
//! number of worker threads, so results are bit-identical whether the blocks
//! are evaluated sequentially or on a rayon pool.

use rayon::prelude::*;

/// Rows per block. Fixed so that the summation tree is independent of threading.
pub const BLOCK_ROWS: usize = 256;

/// Below this many rows the blocks are evaluated on the calling thread.
const PARALLEL_MIN_ROWS: usize = 4 * BLOCK_ROWS;

/// Pairwise (cascade) summation of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n if n <= 8 => values.iter().fold(0.0, |acc, v| acc + v),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Pairwise reduction of equally sized vectors, element by element.
pub fn pairwise_sum_vectors(mut parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; len];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut iter = parts.into_iter();
        while let Some(mut a) = iter.next() {
            if let Some(b) = iter.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Evaluate `f` on fixed row blocks and collect the partials in block order.
pub fn map_blocks<T, F>(rows: &[usize], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync + Send,
{
    if rows.len() < PARALLEL_MIN_ROWS || rayon::current_num_threads() == 1 {
        rows.chunks(BLOCK_ROWS).map(&f).collect()
    } else {
        rows.par_chunks(BLOCK_ROWS).map(&f).collect()
    }
}
