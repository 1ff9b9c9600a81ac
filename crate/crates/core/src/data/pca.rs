use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, gemm, symmetric_eigen, Matrix};
use crate::{Error, Result};

/// Mean and leading principal directions of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k × dim`, orthonormal rows, leading component first.
    pub components: Matrix,
    /// Sample variances along the components, non-increasing.
    pub variances: Vec<f64>,
}

impl PcaProjection {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Point of the original space with the given coordinates.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        assert_eq!(coords.len(), self.k());
        let mut x = self.mean.clone();
        for (c, &z) in coords.iter().enumerate() {
            crate::linalg::axpy(z, self.components.row(c), &mut x);
        }
        x
    }
}

/// Fits the top `k` components of `n` samples of dimension `dim` (row-major).
/// Covariance normalization is `1/(n-1)`; each component's sign is fixed so
/// its largest-magnitude entry is positive.
pub fn fit_pca(samples: &[f64], dim: usize, k: usize) -> Result<PcaProjection> {
    if dim == 0 || samples.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: samples.len(),
        });
    }
    let n = samples.len() / dim;
    if k == 0 || k > dim || n < k + 1 {
        return Err(Error::DegenerateCovariance(format!(
            "need 1 <= k <= dim and at least k+1 samples (k={k}, dim={dim}, n={n})"
        )));
    }
    let mut mean = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        crate::linalg::axpy(1.0, row, &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = samples.to_vec();
    for row in centered.chunks_exact_mut(dim) {
        row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    let mut cov = Matrix::zeros(dim, dim);
    gemm(
        dim,
        n,
        dim,
        1.0 / (n as f64 - 1.0),
        (&centered, 1, dim),
        (&centered, dim, 1),
        0.0,
        (cov.as_mut_slice(), dim, 1),
    );
    cov.symmetrize();
    let eig = symmetric_eigen(&cov)?;

    let top = eig.values[dim - 1];
    let mut components = Matrix::zeros(k, dim);
    let mut variances = Vec::with_capacity(k);
    for c in 0..k {
        let j = dim - 1 - c;
        let var = eig.values[j];
        if !(var > 1e-12 * top.abs()) {
            return Err(Error::DegenerateCovariance(format!(
                "component {c} has variance {var:e} (leading {top:e})"
            )));
        }
        variances.push(var);
        let v = eig.vectors.row(j);
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        components
            .row_mut(c)
            .iter_mut()
            .zip(v)
            .for_each(|(o, x)| *o = sign * x);
    }
    Ok(PcaProjection {
        mean,
        components,
        variances,
    })
}

/// Coordinates of each row of `samples` on the fitted components (`n × k`).
pub fn apply_pca(proj: &PcaProjection, samples: &[f64]) -> Result<Vec<f64>> {
    let dim = proj.input_dim();
    if samples.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: samples.len() % dim,
        });
    }
    let k = proj.k();
    let mut out = Vec::with_capacity(samples.len() / dim * k);
    let mut centered = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        centered
            .iter_mut()
            .zip(row.iter().zip(&proj.mean))
            .for_each(|(c, (x, m))| *c = x - m);
        out.extend((0..k).map(|c| dot(proj.components.row(c), &centered)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planar_data_exactly() {
        // Points in the plane spanned by (1,1,0)/√2 and (0,0,1), offset by (1,2,3).
        let coords = [(1.0, 0.5), (-2.0, 1.0), (0.3, -1.5), (2.0, 2.0), (-0.7, 0.1)];
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut data = Vec::new();
        for (a, b) in coords {
            data.extend_from_slice(&[1.0 + a * s, 2.0 + a * s, 3.0 + b]);
        }
        let p = fit_pca(&data, 3, 2).unwrap();
        assert!(p.variances[0] >= p.variances[1]);
        let z = apply_pca(&p, &data).unwrap();
        for (i, row) in data.chunks_exact(3).enumerate() {
            let back = p.reconstruct(&z[2 * i..2 * i + 2]);
            for (x, y) in back.iter().zip(row) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(fit_pca(&data, 3, 3).is_err());
    }
}
