//! Plain real matrix multiply used by the batched multiply stage.
//!
//! Each output element is accumulated from zero in ascending order of the
//! inner index, so results do not depend on blocking or on how callers
//! split work across threads. Both kernels return the number of scalar
//! multiplies they executed.

use crate::scalar::Real;

/// Strided read-only matrix view.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T: Copy> MatRef<'a, T> {
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        MatRef { data, rows, cols, row_stride: cols, col_stride: 1 }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.row_stride + c * self.col_stride]
    }

    /// Contiguous row `r` (requires `col_stride == 1`).
    #[inline]
    pub fn row(&self, r: usize) -> &'a [T] {
        debug_assert_eq!(self.col_stride, 1);
        &self.data[r * self.row_stride..r * self.row_stride + self.cols]
    }
}

const COL_BLOCK: usize = 512;

/// `out = a · b` with `out` row-major `a.rows × b.cols`; `b` must have
/// contiguous rows.
pub fn gemm<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>, out: &mut [T]) -> u64 {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(out.len(), a.rows * b.cols, "output has wrong size");
    assert_eq!(b.col_stride, 1, "b rows must be contiguous");
    let n = b.cols;
    let mut count = 0u64;
    out.fill(T::zero());
    for j0 in (0..n).step_by(COL_BLOCK) {
        let j1 = (j0 + COL_BLOCK).min(n);
        for i in 0..a.rows {
            let dst = &mut out[i * n + j0..i * n + j1];
            for t in 0..a.cols {
                let av = a.at(i, t);
                let src = &b.row(t)[j0..j1];
                for (o, &bv) in dst.iter_mut().zip(src) {
                    *o += av * bv;
                }
                count += (j1 - j0) as u64;
            }
        }
    }
    count
}

/// `out = a · bᵀ` where both operands have contiguous rows of equal length.
pub fn gemm_nt<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>, out: &mut [T]) -> u64 {
    assert_eq!(a.cols, b.cols, "inner dimensions differ");
    assert_eq!(out.len(), a.rows * b.rows, "output has wrong size");
    let mut count = 0u64;
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            let br = b.row(j);
            let mut acc = T::zero();
            for (&x, &y) in ar.iter().zip(br) {
                acc += x * y;
            }
            out[i * b.rows + j] = acc;
            count += ar.len() as u64;
        }
    }
    count
}
