use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, householder, Matrix};

/// Thin Householder QR of a tall matrix (`rows >= cols`).
///
/// Returns `(Q, R)` with `Q: rows×cols` having orthonormal columns and `R`
/// upper triangular, `A = Q R`.
pub fn thin_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "thin_qr needs rows >= cols");
    let mut w = a.transpose().into_vec();
    let mut taus = vec![0.0; n];
    let mut r = Matrix::zeros(n, n);

    for k in 0..n {
        let (head, tail) = w.split_at_mut((k + 1) * m);
        let v = &mut head[k * m + k..];
        let (alpha, tau) = householder(v);
        taus[k] = tau;
        r[(k, k)] = alpha;
        for j in 0..(n - k - 1) {
            let col = &mut tail[j * m + k..(j + 1) * m];
            if tau != 0.0 {
                let s = tau * dot(v, col);
                axpy(-s, v, col);
            }
            r[(k, k + 1 + j)] = col[0];
        }
    }

    // Q = H_0 H_1 … H_{n-1} applied to the first n columns of the identity.
    let mut q: Vec<f64> = vec![0.0; m * n];
    for j in 0..n {
        q[j * m + j] = 1.0;
    }
    for k in (0..n).rev() {
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        let v = &w[k * m + k..(k + 1) * m];
        for j in k..n {
            let col = &mut q[j * m + k..(j + 1) * m];
            let s = tau * dot(v, col);
            axpy(-s, v, col);
        }
    }
    let mut qm = Matrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            qm[(i, j)] = q[j * m + i];
        }
    }
    (qm, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_input() {
        let a = Matrix::from_vec(4, 3, vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 2.0, 2.0, 1.0, 0.0, -1.0, 4.0]);
        let (q, r) = thin_qr(&a);
        let qr = q.matmul(&r);
        for (x, y) in qr.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-13);
        }
        let qtq = q.transpose().matmul(&q);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-14);
            }
        }
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }
}
