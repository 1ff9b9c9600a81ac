//! Symmetric eigensolver: Householder tridiagonalization followed by the
//! implicit QL iteration (the EISPACK `tred2`/`tql2` pair).

use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Eigenvalues in ascending order; `vectors` row `i` is the unit
/// eigenvector belonging to `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigenvalues of a symmetric matrix, ascending. Only the lower triangle is
/// read.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    assert_eq!(a.rows(), a.cols(), "eigenvalues of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // A symmetric row-major matrix read as column-major is its transpose,
    // i.e. itself, so the lower triangle of the scratch copy is valid.
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, n, &mut d, &mut e, false);
    shift_off_diagonal(&mut e);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    assert_eq!(a.rows(), a.cols(), "eigendecomposition of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, n, &mut d, &mut e, true);
    shift_off_diagonal(&mut e);
    ql_implicit(&mut d, &mut e, Some(&mut v))?;

    // Selection sort keeps eigenvector columns paired with their values.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in (i + 1)..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            for r in 0..n {
                v.swap(i * n + r, k * n + r);
            }
        }
    }
    // Column j of the column-major buffer is eigenvector j, which is row j
    // when the buffer is read row-major.
    Ok(SymmetricEigen {
        values: d,
        vectors: Matrix::from_vec(n, n, v),
    })
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub-diagonal `off` (`off.len() == diag.len() - 1`). Results overwrite
/// `diag`, ascending.
pub fn tridiagonal_eigenvalues(diag: &mut [f64], off: &[f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    assert_eq!(off.len() + 1, n, "tridiagonal sub-diagonal length");
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    ql_implicit(diag, &mut e, None)?;
    diag.sort_by(f64::total_cmp);
    Ok(())
}

/// `tred2` on a column-major `n×n` buffer `v` (lower triangle significant).
///
/// On return `d` is the tridiagonal diagonal and `e[i]` (i ≥ 1) couples rows
/// `i-1` and `i`. With `accumulate` the buffer holds the orthogonal
/// transformation afterwards; otherwise its contents are garbage.
fn tridiagonalize(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |r: usize, c: usize| c * n + r;

    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            // e ← A d restricted to the leading i×i block.
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                let col = &v[j * n..j * n + i];
                g = e[j] + col[j] * f;
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut v[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn shift_off_diagonal(e: &mut [f64]) {
    let n = e.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
}

/// Implicit QL on a tridiagonal matrix (`tql2`). `e[i]` couples `i` and
/// `i+1`; `e[n-1]` must be zero. When `vectors` is given (column-major
/// `n×n`), the rotations are accumulated into it.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut vectors: Option<&mut [f64]>) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let n = d.len();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0 guarantees m < n.
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(v) = vectors.as_deref_mut() {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut lo[i * n..];
                        let col_i1 = &mut hi[..n];
                        for k in 0..n {
                            let t = col_i1[k];
                            col_i1[k] = s * col_i[k] + c * t;
                            col_i[k] = c * col_i[k] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
