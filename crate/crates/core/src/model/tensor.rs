//! Dense row-major matrices and the scalar abstraction shared by the f32
//! training path and the f64 verification path.

use std::fmt::Debug;

use num_traits::Float;

pub trait Scalar: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    /// `c = alpha * a @ b + beta * c` with arbitrary strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid `m x k`, `k x n` and `m x n`
    /// matrices; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
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

    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("representable")
    }

    fn f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("representable")
    }
}

impl Scalar for f32 {
    unsafe fn gemm(
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

impl Scalar for f64 {
    unsafe fn gemm(
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
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape {rows}x{cols} vs {} values", data.len());
        Self { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Mat<S>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }
}

/// Transpose flags for [`gemm_into`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tr {
    N,
    T,
}

/// `out += op(a) @ op(b)`, accumulating.
pub fn gemm_into<S: Scalar>(a: &Mat<S>, ta: Tr, b: &Mat<S>, tb: Tr, out: &mut Mat<S>) {
    let (m, k) = match ta {
        Tr::N => (a.rows, a.cols),
        Tr::T => (a.cols, a.rows),
    };
    let (k2, n) = match tb {
        Tr::N => (b.rows, b.cols),
        Tr::T => (b.cols, b.rows),
    };
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!((out.rows, out.cols), (m, n), "output shape");
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let (rsa, csa) = match ta {
        Tr::N => (a.cols as isize, 1),
        Tr::T => (1, a.cols as isize),
    };
    let (rsb, csb) = match tb {
        Tr::N => (b.cols as isize, 1),
        Tr::T => (1, b.cols as isize),
    };
    // SAFETY: shapes were checked above and `out` is a distinct allocation.
    unsafe {
        S::gemm(
            m,
            k,
            n,
            S::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            S::one(),
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul<S: Scalar>(a: &Mat<S>, ta: Tr, b: &Mat<S>, tb: Tr) -> Mat<S> {
    let m = if ta == Tr::N { a.rows } else { a.cols };
    let n = if tb == Tr::N { b.cols } else { b.rows };
    let mut out = Mat::zeros(m, n);
    gemm_into(a, ta, b, tb, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
        let mut c = Mat::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                c.data[i * b.cols + j] = (0..a.cols)
                    .map(|p| a.data[i * a.cols + p] * b.data[p * b.cols + j])
                    .sum();
            }
        }
        c
    }

    fn transpose(a: &Mat<f64>) -> Mat<f64> {
        let mut t = Mat::zeros(a.cols, a.rows);
        for i in 0..a.rows {
            for j in 0..a.cols {
                t.data[j * a.rows + i] = a.data[i * a.cols + j];
            }
        }
        t
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        let a = Mat::from_vec(3, 4, (0..12).map(|v| v as f64 * 0.3 - 1.0).collect());
        let b = Mat::from_vec(4, 2, (0..8).map(|v| (v as f64).sin()).collect());
        let want = naive(&a, &b);
        let at = transpose(&a);
        let bt = transpose(&b);
        for (x, tx, y, ty) in [
            (&a, Tr::N, &b, Tr::N),
            (&at, Tr::T, &b, Tr::N),
            (&a, Tr::N, &bt, Tr::T),
            (&at, Tr::T, &bt, Tr::T),
        ] {
            let got = matmul(x, tx, y, ty);
            for (g, w) in got.data.iter().zip(&want.data) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }
}
