//! Minimal dense row-major matrices over `f32`/`f64`, with GEMM delegated to
//! `matrixmultiply`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Real: Float + Default + Debug + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static {
    /// `c = alpha * a * b + beta * c` on strided operands.
    ///
    /// # Safety
    /// Every index reachable through the given shapes and strides must be in
    /// bounds of the corresponding buffer.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(v: f64) -> Self {
        Self::from(v).expect("representable literal")
    }
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

/// A borrowed row block `[start, start + rows)` of a matrix.
#[derive(Clone, Copy)]
pub(crate) struct Rows<'a, T> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [T],
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length");
        Mat { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn rows_view(&self, start: usize, len: usize) -> Rows<'_, T> {
        Rows { rows: len, cols: self.cols, data: &self.data[start * self.cols..(start + len) * self.cols] }
    }

    pub(crate) fn view(&self) -> Rows<'_, T> {
        self.rows_view(0, self.rows)
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| U::from(v).unwrap()).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `c[c_row0..] = alpha * op(a) * op(b) + beta * c[c_row0..]`, where `op`
/// transposes when the flag is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    alpha: T,
    a: Rows<'_, T>,
    trans_a: bool,
    b: Rows<'_, T>,
    trans_b: bool,
    beta: T,
    c: &mut [T],
    c_cols: usize,
) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "gemm inner dimension");
    assert_eq!(n, c_cols, "gemm output columns");
    assert!(c.len() >= m * n, "gemm output buffer");
    let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: shapes and strides above address exactly the asserted extents.
    unsafe {
        T::gemm_raw(m, k, n, alpha, a.data.as_ptr(), rsa, csa, b.data.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

pub(crate) fn matmul<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let mut out = Mat::zeros(a.rows, b.cols);
    gemm(T::one(), a.view(), false, b.view(), false, T::zero(), &mut out.data, b.cols);
    out
}

pub(crate) fn relu_inplace<T: Real>(m: &mut Mat<T>) {
    m.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
}

pub(crate) fn relu<T: Real>(m: &Mat<T>) -> Mat<T> {
    let mut out = m.clone();
    relu_inplace(&mut out);
    out
}

/// `grad *= 1[pre > 0]`.
pub(crate) fn relu_backward<T: Real>(grad: &mut Mat<T>, pre: &Mat<T>) {
    for (g, &p) in grad.data.iter_mut().zip(&pre.data) {
        if p <= T::zero() {
            *g = T::zero();
        }
    }
}

pub(crate) fn add_assign<T: Real>(dst: &mut Mat<T>, src: &Mat<T>) {
    debug_assert_eq!((dst.rows, dst.cols), (src.rows, src.cols));
    for (d, &s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}

pub(crate) fn add_rows<T: Real>(m: &mut Mat<T>, bias: &[T]) {
    for r in m.data.chunks_exact_mut(m.cols) {
        for (v, &b) in r.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub(crate) fn col_sums_into<T: Real>(m: &Mat<T>, out: &mut [T]) {
    for r in m.data.chunks_exact(m.cols) {
        for (o, &v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        let a = Mat::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_vec(3, 2, vec![1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(matmul(&a, &b).data, vec![4.0, 5.0, 10.0, 11.0]);

        // a^T a
        let mut c = vec![0.0f64; 9];
        gemm(1.0, a.view(), true, a.view(), false, 0.0, &mut c, 3);
        assert_eq!(c, vec![17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);

        // a a^T accumulated onto ones
        let mut c = vec![1.0f64; 4];
        gemm(1.0, a.view(), false, a.view(), true, 1.0, &mut c, 2);
        assert_eq!(c, vec![15.0, 33.0, 33.0, 78.0]);
    }

    #[test]
    fn row_blocks() {
        let a = Mat::from_vec(3, 2, vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let id = Mat::from_vec(2, 2, vec![1.0f32, 0.0, 0.0, 1.0]);
        let mut c = vec![0.0f32; 4];
        gemm(1.0, a.rows_view(1, 2), false, id.view(), false, 0.0, &mut c, 2);
        assert_eq!(c, vec![3.0, 4.0, 5.0, 6.0]);
    }
}
