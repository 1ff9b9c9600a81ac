//! Singular values by Householder bidiagonalization.
//!
//! The bidiagonal `B` (diagonal `q`, super-diagonal `e`) is embedded in the
//! `2n×2n` symmetric tridiagonal matrix with zero diagonal and off-diagonal
//! `q0, e0, q1, e1, …`, whose eigenvalues are `±σ_i`. The QL iteration
//! resolves them to absolute accuracy of order `ε‖B‖`, which is what a
//! relative rank threshold needs.

use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, householder, Matrix};
use crate::Result;

/// Singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let (m, n, mut w) = if a.rows() < a.cols() {
        // Row-major A is column-major Aᵀ, which is tall.
        (a.cols(), a.rows(), a.as_slice().to_vec())
    } else {
        (a.rows(), a.cols(), a.transpose().into_vec())
    };
    singular_values_col_major(m, n, &mut w)
}

/// Singular values of the column-major `m×n` matrix in `w` (`m >= n`),
/// descending. The buffer is destroyed.
pub(crate) fn singular_values_col_major(m: usize, n: usize, w: &mut [f64]) -> Result<Vec<f64>> {
    assert!(m >= n);
    assert_eq!(w.len(), m * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let (q, e) = bidiagonalize(m, n, w);

    let mut diag = vec![0.0; 2 * n];
    let mut off = Vec::with_capacity(2 * n - 1);
    for k in 0..n {
        off.push(q[k]);
        if k + 1 < n {
            off.push(e[k]);
        }
    }
    super::tridiagonal_eigenvalues(&mut diag, &off)?;
    // Ascending ±σ pairs: the top half holds the singular values.
    let mut sv: Vec<f64> = diag[n..].iter().map(|s| s.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Golub–Kahan reduction of a column-major `m×n` (`m >= n`) matrix to upper
/// bidiagonal form. Returns `(diagonal, super-diagonal)`.
fn bidiagonalize(m: usize, n: usize, w: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut u = vec![0.0; n];
    let mut z = vec![0.0; m];

    for k in 0..n {
        // Left reflector: zero column k below the diagonal.
        let (head, tail) = w.split_at_mut((k + 1) * m);
        let v = &mut head[k * m + k..];
        let (alpha, tau) = householder(v);
        q[k] = alpha;
        if tau != 0.0 {
            for j in 0..(n - k - 1) {
                let col = &mut tail[j * m + k..(j + 1) * m];
                let s = tau * dot(v, col);
                axpy(-s, v, col);
            }
        }

        if k + 1 >= n {
            break;
        }
        // Right reflector: zero row k to the right of the super-diagonal.
        let len = n - k - 1;
        let row = &mut u[..len];
        for (j, r) in row.iter_mut().enumerate() {
            *r = w[(k + 1 + j) * m + k];
        }
        let (alpha, tau) = householder(row);
        e[k] = alpha;
        if tau == 0.0 {
            continue;
        }
        // Rows k+1.. of the trailing block: z = A u, then A -= tau z uᵀ.
        let rows = m - k - 1;
        let z = &mut z[..rows];
        z.fill(0.0);
        for (j, &uj) in row.iter().enumerate() {
            let col = &w[(k + 1 + j) * m + k + 1..(k + 2 + j) * m];
            axpy(uj, col, z);
        }
        for (j, &uj) in row.iter().enumerate() {
            let col = &mut w[(k + 1 + j) * m + k + 1..(k + 2 + j) * m];
            axpy(-tau * uj, z, col);
        }
    }
    (q, e)
}
