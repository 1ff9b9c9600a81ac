use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{NetworkConfig, Params};
use crate::linalg::{thin_qr, Matrix};
use crate::rng::{stream, tags};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Weights and biases uniform on `[-σ, σ]`, `σ = 1/√fan_in`.
    Uniform,
    /// Orthogonal weight matrices (gain 1), zero biases.
    Orthogonal,
}

impl Init {
    pub fn sample(self, config: NetworkConfig, seed: u64) -> Result<Params> {
        match self {
            Init::Uniform => init_uniform(config, seed),
            Init::Orthogonal => init_orthogonal(config, seed),
        }
    }
}

pub fn init_uniform(config: NetworkConfig, seed: u64) -> Result<Params> {
    let mut p = Params::zeros(config)?;
    let mut rng = stream(seed, tags::INIT);
    for i in 0..p.num_layers() {
        let l = p.layer_mut(i);
        let s = 1.0 / libm::sqrt(l.fan_in as f64);
        for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *w = rng.random_range(-s..=s);
        }
    }
    Ok(p)
}

pub fn init_orthogonal(config: NetworkConfig, seed: u64) -> Result<Params> {
    let mut p = Params::zeros(config)?;
    let mut rng = stream(seed, tags::INIT);
    for i in 0..p.num_layers() {
        let l = p.layer_mut(i);
        let w = orthogonal_block(l.fan_out, l.fan_in, &mut rng);
        l.weights.copy_from_slice(w.as_slice());
    }
    Ok(p)
}

/// `rows×cols` matrix with orthonormal rows or columns, whichever is fewer.
/// Q from the QR of a Gaussian matrix, with the columns' signs fixed by the
/// diagonal of R so the result is Haar distributed.
fn orthogonal_block<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let (m, n) = if rows < cols { (cols, rows) } else { (rows, cols) };
    let g: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(rng)).collect();
    let (mut q, r) = thin_qr(&Matrix::from_vec(m, n, g));
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if rows < cols {
        q.transpose()
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;

    #[test]
    fn uniform_bounds_and_determinism() {
        let c = NetworkConfig::new(9, 4, 2, Activation::Relu).unwrap();
        let a = init_uniform(c, 3).unwrap();
        let b = init_uniform(c, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_uniform(c, 4).unwrap());
        for i in 0..a.num_layers() {
            let l = a.layer(i);
            let s = 1.0 / (l.fan_in as f64).sqrt();
            assert!(l.weights.iter().chain(l.bias).all(|w| w.abs() <= s));
        }
    }

    #[test]
    fn orthogonal_rows_or_columns() {
        let c = NetworkConfig::new(3, 5, 2, Activation::Relu).unwrap();
        let p = init_orthogonal(c, 11).unwrap();
        for i in 0..p.num_layers() {
            let l = p.layer(i);
            assert!(l.bias.iter().all(|&b| b == 0.0));
            let w = Matrix::from_vec(l.fan_out, l.fan_in, l.weights.to_vec());
            let g = if l.fan_out <= l.fan_in {
                w.matmul(&w.transpose())
            } else {
                w.transpose().matmul(&w)
            };
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((g[(r, c)] - want).abs() < 1e-12);
                }
            }
        }
    }
}
