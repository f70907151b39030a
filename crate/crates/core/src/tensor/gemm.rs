//! Register-blocked `C += A·B` on row-major slices.
//!
//! Every output element accumulates its `k` products in ascending order. The
//! portable path matches a naive triple loop bit for bit; with FMA the only
//! difference is the skipped rounding of each product.

use super::Scalar;

/// `c[m×n] += a[m×k] · b[k×n]`.
///
/// On x86-64 with AVX2 and FMA the same code is compiled with wider vectors
/// and fused multiply-add. The choice depends only on the CPU, so a given
/// machine always produces the same bits.
pub(crate) fn gemm_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the CPU supports AVX2 and FMA, checked above.
            unsafe { gemm_avx2(m, k, n, a, b, c) };
            return;
        }
    }
    gemm_blocked::<T, 4, 8, 4, false>(m, k, n, a, b, c)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemm_avx2<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    gemm_blocked::<T, 6, 16, 8, true>(m, k, n, a, b, c)
}

#[inline(always)]
fn gemm_blocked<T: Scalar, const MR: usize, const NR: usize, const NH: usize, const FMA: bool>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    b: &[T],
    c: &mut [T],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let mut i = 0;
    while i + MR <= m {
        row_block::<T, MR, NR, NH, FMA>(i, k, n, a, b, c);
        i += MR;
    }
    while i < m {
        row_block::<T, 1, NR, NH, FMA>(i, k, n, a, b, c);
        i += 1;
    }
}

/// Rows `i..i + R`, all columns: wide tiles, then half-width tiles, then
/// scalar leftovers.
#[inline(always)]
fn row_block<T: Scalar, const R: usize, const NR: usize, const NH: usize, const FMA: bool>(
    i: usize,
    k: usize,
    n: usize,
    a: &[T],
    b: &[T],
    c: &mut [T],
) {
    let mut j = 0;
    while j + NR <= n {
        micro_tile::<T, R, NR, FMA>(k, n, &a[i * k..], &b[j..], &mut c[i * n + j..]);
        j += NR;
    }
    while j + NH <= n {
        micro_tile::<T, R, NH, FMA>(k, n, &a[i * k..], &b[j..], &mut c[i * n + j..]);
        j += NH;
    }
    for r in i..i + R {
        for jj in j..n {
            let mut s = c[r * n + jj];
            for p in 0..k {
                s = madd::<T, FMA>(a[r * k + p], b[p * n + jj], s);
            }
            c[r * n + jj] = s;
        }
    }
}

#[inline(always)]
fn micro_tile<T: Scalar, const MR: usize, const NR: usize, const FMA: bool>(k: usize, ldb: usize, a: &[T], b: &[T], c: &mut [T]) {
    let mut acc = [[T::zero(); NR]; MR];
    for (r, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&c[r * ldb..r * ldb + NR]);
    }
    for p in 0..k {
        let brow: &[T; NR] = b[p * ldb..p * ldb + NR].try_into().unwrap();
        for (r, row) in acc.iter_mut().enumerate() {
            let av = a[r * k + p];
            for q in 0..NR {
                row[q] = madd::<T, FMA>(av, brow[q], row[q]);
            }
        }
    }
    for (r, row) in acc.iter().enumerate() {
        c[r * ldb..r * ldb + NR].copy_from_slice(row);
    }
}

#[inline(always)]
fn madd<T: Scalar, const FMA: bool>(a: T, b: T, c: T) -> T {
    if FMA {
        a.mul_add(b, c)
    } else {
        c + a * b
    }
}

/// Row-major transpose of an `m×n` block.
pub(crate) fn transpose_into<T: Scalar>(m: usize, n: usize, src: &[T], dst: &mut [T]) {
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
}
