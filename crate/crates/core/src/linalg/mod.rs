//! Dense linear algebra: a row-major [`Matrix`], GEMM, the symmetric
//! eigensolver, singular values and thin QR.
//!
//! Everything is double precision. The factorizations work on column-major
//! scratch copies so their inner loops run over contiguous memory.

mod eigen;
mod qr;
mod svd;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

pub use eigen::{symmetric_eigen, symmetric_eigenvalues, tridiagonal_eigenvalues, SymmetricEigen};
pub use qr::thin_qr;
pub use svd::singular_values;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            1.0,
            (&self.data, self.cols, 1),
            (&other.data, other.cols, 1),
            0.0,
            (&mut out.data, other.cols, 1),
        );
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    /// Replaces `A` by `(A + Aᵀ)/2`, which is exactly symmetric in floating
    /// point because addition commutes.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for r in 0..n {
            for c in (r + 1)..n {
                let v = 0.5 * (self.data[r * n + c] + self.data[c * n + r]);
                self.data[r * n + c] = v;
                self.data[c * n + r] = v;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `P A Pᵀ` for the permutation sending index `i` to `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Matrix {
        assert_eq!(self.rows, self.cols);
        assert_eq!(perm.len(), self.rows);
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(perm[r], perm[c])] = self[(r, c)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in (4 * chunks)..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// A strided view: `(data, row_stride, col_stride)`.
pub type Strided<'a> = (&'a [f64], usize, usize);
pub type StridedMut<'a> = (&'a mut [f64], usize, usize);

#[inline]
fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// `C ← alpha·A·B + beta·C` with `A: m×k`, `B: k×n`, `C: m×n` given as
/// strided views. Transposes are expressed by swapping strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: Strided<'_>,
    b: Strided<'_>,
    beta: f64,
    c: StridedMut<'_>,
) {
    let (a, rsa, csa) = a;
    let (b, rsb, csb) = b;
    let (c, rsc, csc) = c;
    assert!(a.len() >= extent(m, k, rsa, csa), "gemm: A too short");
    assert!(b.len() >= extent(k, n, rsb, csb), "gemm: B too short");
    assert!(c.len() >= extent(m, n, rsc, csc), "gemm: C too short");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let v = &mut c[i * rsc + j * csc];
                *v = if beta == 0.0 { 0.0 } else { beta * *v };
            }
        }
        return;
    }
    // SAFETY: the extents above bound every element the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Builds a Householder reflector for `x` in place.
///
/// On return `x` holds `v` with `(I - tau v vᵀ) x_in = alpha e_0`; the
/// return value is `(alpha, tau)`. A zero vector gives `tau = 0`.
pub(crate) fn householder(x: &mut [f64]) -> (f64, f64) {
    let nrm = norm(x);
    if nrm == 0.0 {
        return (0.0, 0.0);
    }
    let alpha = if x[0] > 0.0 { -nrm } else { nrm };
    x[0] -= alpha;
    let vv = dot(x, x);
    if vv == 0.0 {
        return (alpha, 0.0);
    }
    (alpha, 2.0 / vv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_with_transposed_strides() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.0, 0.0, -2.0]);
        // A · Bᵀ
        let mut c = vec![0.0; 4];
        gemm(2, 3, 2, 1.0, (a.as_slice(), 3, 1), (b.as_slice(), 1, 3), 0.0, (&mut c, 2, 1));
        assert_eq!(c, vec![4.5, -5.0, 9.0, -8.0]);
    }

    #[test]
    fn householder_annihilates_tail() {
        let x0 = [3.0, 1.0, -2.0, 0.5];
        let mut v = x0;
        let (alpha, tau) = householder(&mut v);
        let s = dot(&v, &x0);
        let y: Vec<f64> = x0.iter().zip(&v).map(|(x, vi)| x - tau * s * vi).collect();
        assert!((y[0] - alpha).abs() < 1e-14);
        for yi in &y[1..] {
            assert!(yi.abs() < 1e-14);
        }
    }

    #[test]
    fn symmetrize_is_exact() {
        let mut m = Matrix::from_vec(2, 2, vec![1.0, 0.1 + 0.2, 0.3, 2.0]);
        m.symmetrize();
        assert_eq!(m.max_asymmetry(), 0.0);
    }
}
