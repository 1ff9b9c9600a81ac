//! Datasets: random points on the sphere of radius `√d` with random labels,
//! and PCA-reduced images labelled by digit parity.

mod idx;
mod pca;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, tags};
use crate::{Error, Result};

pub use idx::{parse_idx_images, parse_idx_labels, IdxImages};
pub use pca::{apply_pca, fit_pca, PcaProjection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    RandomSphere,
    ImagePca,
}

impl Provenance {
    pub fn code(self) -> u8 {
        match self {
            Provenance::RandomSphere => 0,
            Provenance::ImagePca => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Provenance::RandomSphere),
            1 => Some(Provenance::ImagePca),
            _ => None,
        }
    }
}

/// `P` labelled inputs of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    labels: Vec<i8>,
    provenance: Provenance,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    provenance: Provenance,
    seed: u64,
    d: usize,
    inputs: Vec<f64>,
    labels: Vec<i8>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;
    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::new(r.inputs, r.d, r.labels, r.provenance, r.seed)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            provenance: d.provenance,
            seed: d.seed,
            d: d.dim,
            inputs: d.inputs,
            labels: d.labels,
        }
    }
}

impl Dataset {
    /// Validates shapes and labels, and rejects identical inputs carrying
    /// different labels (no parameter setting can fit both).
    pub fn new(inputs: Vec<f64>, dim: usize, labels: Vec<i8>, provenance: Provenance, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset("input dimension is zero".into()));
        }
        if inputs.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                actual: inputs.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidLabel(y as i64));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite input".into()));
        }
        let ds = Self {
            inputs,
            dim,
            labels,
            provenance,
            seed,
        };
        if let Some((a, b)) = ds.conflicting_duplicate() {
            return Err(Error::InvalidDataset(format!(
                "patterns {a} and {b} are identical but labelled differently"
            )));
        }
        Ok(ds)
    }

    /// Indices of equal rows sorted by bit pattern; returns the first pair
    /// with different labels.
    fn conflicting_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| self.input(i).iter().map(|v| v.to_bits());
        order.sort_by(|&a, &b| key(a).cmp(key(b)));
        order
            .windows(2)
            .find(|w| key(w[0]).eq(key(w[1])) && self.labels[w[0]] != self.labels[w[1]])
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    /// Number of exactly repeated inputs (beyond the first occurrence).
    pub fn duplicate_count(&self) -> usize {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| self.input(i).iter().map(|v| v.to_bits());
        order.sort_by(|&a, &b| key(a).cmp(key(b)));
        order.windows(2).filter(|w| key(w[0]).eq(key(w[1]))).count()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// All inputs, `P × d` row-major.
    #[inline]
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    #[inline]
    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The listed patterns, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidDataset(format!("index {i} out of range")));
            }
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            inputs,
            dim: self.dim,
            labels,
            provenance: self.provenance,
            seed: self.seed,
        })
    }

    /// First `n` patterns and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        Ok((self.subset(&head)?, self.subset(&tail)?))
    }

    /// Same inputs with fresh i.i.d. uniform labels.
    pub fn with_random_labels(&self, seed: u64) -> Dataset {
        let mut rng = stream(seed, tags::LABELS);
        let labels = (0..self.len()).map(|_| random_label(&mut rng)).collect();
        Dataset {
            labels,
            seed,
            ..self.clone()
        }
    }
}

fn random_label<R: Rng>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// `P` points uniform on the sphere of radius `√d` (normalized Gaussians),
/// with i.i.d. uniform labels. Inputs and labels use separate streams.
pub fn random_sphere(p: usize, d: usize, seed: u64) -> Result<Dataset> {
    if p == 0 || d < 2 {
        return Err(Error::InvalidDataset(format!("random_sphere needs P >= 1 and d >= 2, got P={p}, d={d}")));
    }
    let mut rng = stream(seed, tags::DATA);
    let radius = libm::sqrt(d as f64);
    let mut inputs = Vec::with_capacity(p * d);
    let mut g = alloc::vec![0.0; d];
    for _ in 0..p {
        loop {
            g.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let n = crate::linalg::norm(&g);
            if n > 0.0 {
                inputs.extend(g.iter().map(|v| radius * v / n));
                break;
            }
        }
    }
    let mut lrng = stream(seed, tags::LABELS);
    let labels = (0..p).map(|_| random_label(&mut lrng)).collect();
    Dataset::new(inputs, d, labels, Provenance::RandomSphere, seed)
}

/// Even digits map to `+1`, odd digits to `-1`.
pub fn parity_labels(digits: &[u8]) -> Result<Vec<i8>> {
    digits
        .iter()
        .map(|&k| match k {
            0..=9 if k % 2 == 0 => Ok(1),
            0..=9 => Ok(-1),
            _ => Err(Error::InvalidDigit(k)),
        })
        .collect()
}

/// A seeded random choice of `n` distinct indices from `0..total`, in
/// random order.
pub fn sample_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::InvalidDataset(format!("cannot draw {n} of {total} patterns")));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut stream(seed, tags::SUBSET));
    idx.truncate(n);
    Ok(idx)
}
