//! Small dense kernels on row-major `n × n` buffers.

use rayon::prelude::*;

use crate::sum::{merge_ordered, Neumaier};

/// Rows per block in the blocked matrix products.
pub(crate) const ROW_BLOCK: usize = 64;

/// `C = A · B` for row-major square matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * n);
    let mut c = vec![0.0; n * n];
    if n == 0 {
        return c;
    }
    c.par_chunks_mut(ROW_BLOCK * n)
        .enumerate()
        .for_each(|(blk, out)| {
            let r0 = blk * ROW_BLOCK;
            let rows = out.len() / n;
            gemm_rows(&a[r0 * n..(r0 + rows) * n], rows, n, b, n, out);
        });
    c
}

/// `out (rows × cols) = lhs (rows × inner) · rhs (inner × cols)`, all row-major and contiguous.
pub(crate) fn gemm_rows(lhs: &[f64], rows: usize, inner: usize, rhs: &[f64], cols: usize, out: &mut [f64]) {
    // SAFETY: the slices are contiguous row-major buffers of exactly the
    // advertised shapes; matrixmultiply only reads/writes within them.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            inner,
            cols,
            1.0,
            lhs.as_ptr(),
            inner as isize,
            1,
            rhs.as_ptr(),
            cols as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
}

/// Strided product used by the triangular sampler: `out = lhs[.., ..inner] · rhs[..inner, ..]`
/// where `lhs` has row stride `lhs_stride` and `rhs` has row stride `cols`.
pub(crate) fn gemm_strided(
    lhs: &[f64],
    rows: usize,
    inner: usize,
    lhs_stride: usize,
    rhs: &[f64],
    cols: usize,
    out: &mut [f64],
) {
    assert!(rows == 0 || lhs.len() >= (rows - 1) * lhs_stride + inner);
    assert!(rhs.len() >= inner * cols);
    assert!(out.len() >= rows * cols);
    // SAFETY: bounds asserted above.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            inner,
            cols,
            1.0,
            lhs.as_ptr(),
            lhs_stride as isize,
            1,
            rhs.as_ptr(),
            cols as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
}

/// For symmetric `Θ`, returns `(Σ (Θ²)∘Θ, Σ (Θ²)∘(Θ²))` from one blocked square.
///
/// Θ² is never held in full: each row block of the product is reduced as
/// soon as it is formed. Block accumulators merge in block order.
pub fn square_hadamard_sums(theta: &[f64], n: usize) -> (f64, f64) {
    assert_eq!(theta.len(), n * n);
    if n == 0 {
        return (0.0, 0.0);
    }
    let blocks: Vec<(Neumaier, Neumaier)> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|blk| {
            let r0 = blk * ROW_BLOCK;
            let rows = ROW_BLOCK.min(n - r0);
            let lhs = &theta[r0 * n..(r0 + rows) * n];
            let mut sq = vec![0.0; rows * n];
            gemm_rows(lhs, rows, n, theta, n, &mut sq);
            let mut s3 = Neumaier::new();
            let mut s4 = Neumaier::new();
            for (p, t) in sq.iter().zip(lhs) {
                s3.add(p * t);
                s4.add(p * p);
            }
            (s3, s4)
        })
        .collect();
    (
        merge_ordered(blocks.iter().map(|b| &b.0)),
        merge_ordered(blocks.iter().map(|b| &b.1)),
    )
}

/// Σ_ij A_ij B_ij with compensated accumulation.
pub fn hadamard_sum(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect::<Neumaier>().value()
}

/// Lower Cholesky factor of `a + jitter·I` (row-major). On failure returns
/// the offending row and its pivot.
pub fn cholesky_lower(a: &[f64], n: usize, jitter: f64) -> Result<Vec<f64>, (usize, f64)> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            if i == j {
                let pivot = a[i * n + i] + jitter - dot;
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return Err((i, pivot));
                }
                l[i * n + i] = pivot.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - dot) / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// max |L Lᵀ − A| over all entries.
pub fn reconstruction_error(l: &[f64], a: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            worst = worst.max((dot - a[i * n + j]).abs());
        }
    }
    worst
}
