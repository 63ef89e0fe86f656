//! Row-major matrix kernels for the dense layers.
//!
//! The kernels tile the shared operand so it is streamed from memory once
//! per row block instead of once per output row. Per-element accumulation
//! order is fixed (ascending k, and a fixed eight-lane combine in [`dot`]),
//! so results are bitwise reproducible regardless of the rayon thread count.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// Work below this many multiply-adds runs serially.
const PAR_THRESHOLD: usize = 1 << 15;

/// Rows of the shared operand held in cache per tile.
const K_TILE: usize = 64;

fn row_block(m: usize) -> usize {
    let threads = rayon::current_num_threads().max(1);
    if m <= 64 {
        // Mini-batch sized: one block per thread maximizes tile reuse.
        m.div_ceil(threads).max(1)
    } else {
        m.div_ceil(4 * threads).max(1)
    }
}

/// Dot product with eight fixed-stride accumulators. The combine order is
/// fixed, so results are deterministic (though not equal to a single-
/// accumulator loop in the last ulp).
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let a_body = a.chunks_exact(LANES);
    let b_body = b.chunks_exact(LANES);
    let a_tail = a_body.remainder();
    let b_tail = b_body.remainder();
    for (ca, cb) in a_body.zip(b_body) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in a_tail.iter().zip(b_tail) {
        tail += x * y;
    }
    let even = (acc[0] + acc[4]) + (acc[2] + acc[6]);
    let odd = (acc[1] + acc[5]) + (acc[3] + acc[7]);
    (even + odd) + tail
}

fn matmul_impl<T: Scalar>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * n];
    let rows = row_block(m);
    let body = |(block, chunk): (usize, &mut [T])| {
        let i0 = block * rows;
        for kt in (0..k).step_by(K_TILE) {
            let k1 = (kt + K_TILE).min(k);
            for (li, crow) in chunk.chunks_mut(n).enumerate() {
                let arow = &a[(i0 + li) * k..(i0 + li) * k + k];
                for kk in kt..k1 {
                    let aik = arow[kk];
                    let brow = &b[kk * n..kk * n + n];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv += aik * bv;
                    }
                }
            }
        }
    };
    if parallel {
        c.par_chunks_mut(n * rows).enumerate().for_each(body);
    } else {
        c.chunks_mut(n * rows).enumerate().for_each(body);
    }
    c
}

fn matmul_a_bt_impl<T: Scalar>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![T::zero(); m * n];
    let rows = row_block(m);
    let body = |(block, chunk): (usize, &mut [T])| {
        let i0 = block * rows;
        for jt in (0..n).step_by(K_TILE) {
            let j1 = (jt + K_TILE).min(n);
            for (li, crow) in chunk.chunks_mut(n).enumerate() {
                let arow = &a[(i0 + li) * k..(i0 + li) * k + k];
                for (j, cv) in (jt..j1).zip(crow[jt..j1].iter_mut()) {
                    *cv = dot(arow, &b[j * k..j * k + k]);
                }
            }
        }
    };
    if parallel {
        c.par_chunks_mut(n * rows).enumerate().for_each(body);
    } else {
        c.chunks_mut(n * rows).enumerate().for_each(body);
    }
    c
}

fn matmul_at_b_impl<T: Scalar>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    let mut c = vec![T::zero(); k * n];
    // Four batch rows per pass break the load-add-store dependency chain on
    // the output row; the grouping is fixed, so results stay deterministic.
    let body = |(kk, crow): (usize, &mut [T])| {
        let mut i = 0usize;
        while i + 4 <= m {
            let a0 = a[i * k + kk];
            let a1 = a[(i + 1) * k + kk];
            let a2 = a[(i + 2) * k + kk];
            let a3 = a[(i + 3) * k + kk];
            let b0 = &b[i * n..i * n + n];
            let b1 = &b[(i + 1) * n..(i + 1) * n + n];
            let b2 = &b[(i + 2) * n..(i + 2) * n + n];
            let b3 = &b[(i + 3) * n..(i + 3) * n + n];
            for (j, cv) in crow.iter_mut().enumerate() {
                *cv += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
            }
            i += 4;
        }
        while i < m {
            let aik = a[i * k + kk];
            let brow = &b[i * n..i * n + n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aik * bv;
            }
            i += 1;
        }
    };
    if parallel {
        c.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        c.chunks_mut(n).enumerate().for_each(body);
    }
    c
}

/// C(m x n) = A(m x k) * B(k x n).
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    matmul_impl(a, b, m, k, n, m * k * n >= PAR_THRESHOLD)
}

/// C(m x n) = A(m x k) * B(n x k)^T.
pub fn matmul_a_bt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    matmul_a_bt_impl(a, b, m, k, n, m * k * n >= PAR_THRESHOLD)
}

/// C(k x n) = A(m x k)^T * B(m x n). With a mini-batch in A and B, B stays
/// cache-resident across all k output rows.
pub fn matmul_at_b<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    matmul_at_b_impl(a, b, m, k, n, m * k * n >= PAR_THRESHOLD)
}

/// Serial variants for callers already running inside a worker pool.
pub(crate) fn matmul_serial<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    matmul_impl(a, b, m, k, n, false)
}

pub(crate) fn matmul_a_bt_serial<T: Scalar>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) -> Vec<T> {
    matmul_a_bt_impl(a, b, m, k, n, false)
}
