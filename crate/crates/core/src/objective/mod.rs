//! Margins, the quadratic hinge loss, the logistic baseline and training.

mod train;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::net::{BatchTape, Params};
use crate::{Error, Result};

pub use train::{train, LossKind, Optimizer, StopReason, TrainRecord, TrainSchedule, TrainTrajectory};

/// `Δ_μ = 1 − y_μ f(x_μ)` for every pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector {
    deltas: Vec<f64>,
}

impl MarginVector {
    pub fn from_outputs(outputs: &[f64], labels: &[i8]) -> Self {
        debug_assert_eq!(outputs.len(), labels.len());
        Self {
            deltas: outputs
                .iter()
                .zip(labels)
                .map(|(&f, &y)| 1.0 - y as f64 * f)
                .collect(),
        }
    }

    pub fn from_deltas(deltas: Vec<f64>) -> Self {
        Self { deltas }
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Number of unsatisfied constraints, `Δ_μ > 0`.
    pub fn n_delta(&self) -> usize {
        self.deltas.iter().filter(|&&d| d > 0.0).count()
    }

    /// Indices with `Δ_μ > 0`, ascending.
    pub fn active(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.deltas[i] > 0.0).collect()
    }
}

pub(crate) fn check_dataset(params: &Params, data: &Dataset) -> Result<()> {
    if data.dim() != params.config().d {
        return Err(Error::DimensionMismatch {
            expected: params.config().d,
            actual: data.dim(),
        });
    }
    if data.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    Ok(())
}

pub fn margins(params: &Params, data: &Dataset) -> Result<MarginVector> {
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    Ok(MarginVector::from_outputs(tape.outputs(), data.labels()))
}

/// `ℒ = (1/P) Σ ½ max(0, Δ_μ)²`; exactly zero when no margin is positive.
pub fn hinge_loss(m: &MarginVector) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let s: f64 = m
        .deltas
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|d| 0.5 * d * d)
        .fold(0.0, |a, b| a + b);
    s / m.len() as f64
}

/// Output seeds `∂ℒ/∂f_μ = −Δ_μ y_μ / P` (zero on satisfied patterns).
pub(crate) fn hinge_seeds(m: &MarginVector, labels: &[i8]) -> Vec<f64> {
    let p = m.len() as f64;
    m.deltas
        .iter()
        .zip(labels)
        .map(|(&d, &y)| if d > 0.0 { -d * y as f64 / p } else { 0.0 })
        .collect()
}

/// `∇_W ℒ`. Backpropagates through the unsatisfied patterns only.
pub fn loss_gradient(params: &Params, data: &Dataset) -> Result<Vec<f64>> {
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    let m = MarginVector::from_outputs(tape.outputs(), data.labels());
    Ok(hinge_gradient_from_tape(params, data, &tape, &m))
}

pub(crate) fn hinge_gradient_from_tape(params: &Params, data: &Dataset, tape: &BatchTape, m: &MarginVector) -> Vec<f64> {
    let active = m.active();
    if active.is_empty() {
        return vec![0.0; params.len()];
    }
    let seeds_all = hinge_seeds(m, data.labels());
    if active.len() == data.len() {
        let g = tape.backward(params, &seeds_all);
        return tape.gradient(params, data.inputs(), &g);
    }
    let (sub, x) = tape.select(data.inputs(), &active);
    let seeds: Vec<f64> = active.iter().map(|&i| seeds_all[i]).collect();
    let g = sub.backward(params, &seeds);
    sub.gradient(params, &x, &g)
}

/// `softplus(z) = ln(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Mean logistic loss `(1/P) Σ ln(1 + exp(−y_μ f_μ))`.
pub fn cross_entropy_loss(params: &Params, data: &Dataset) -> Result<f64> {
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    Ok(cross_entropy_from_outputs(tape.outputs(), data.labels()))
}

pub(crate) fn cross_entropy_from_outputs(outputs: &[f64], labels: &[i8]) -> f64 {
    let s: f64 = outputs
        .iter()
        .zip(labels)
        .map(|(&f, &y)| softplus(-(y as f64) * f))
        .sum();
    s / outputs.len() as f64
}

pub(crate) fn cross_entropy_seeds(outputs: &[f64], labels: &[i8]) -> Vec<f64> {
    let p = outputs.len() as f64;
    outputs
        .iter()
        .zip(labels)
        .map(|(&f, &y)| {
            let y = y as f64;
            -y * sigmoid(-y * f) / p
        })
        .collect()
}

pub fn cross_entropy_gradient(params: &Params, data: &Dataset) -> Result<Vec<f64>> {
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    let seeds = cross_entropy_seeds(tape.outputs(), data.labels());
    let g = tape.backward(params, &seeds);
    Ok(tape.gradient(params, data.inputs(), &g))
}

/// Fraction of patterns with `y f ≤ 0`; a zero output counts as an error.
pub fn error_fraction(outputs: &[f64], labels: &[i8]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let wrong = outputs
        .iter()
        .zip(labels)
        .filter(|(&f, &y)| y as f64 * f <= 0.0)
        .count();
    wrong as f64 / outputs.len() as f64
}

pub fn test_error(params: &Params, test: &Dataset) -> Result<f64> {
    check_dataset(params, test)?;
    let tape = BatchTape::forward(params, test.inputs(), test.len());
    Ok(error_fraction(tape.outputs(), test.labels()))
}

/// Final and best test error along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub final_error: f64,
    pub min_error: f64,
    /// Position of the minimum among the test evaluations (first if tied).
    pub min_index: usize,
    pub min_step: u64,
}

impl EarlyStop {
    /// Over-fitting gap, final minus early-stopped error (never negative).
    pub fn gap(&self) -> f64 {
        self.final_error - self.min_error
    }
}

pub fn early_stop_summary(traj: &TrainTrajectory) -> Result<EarlyStop> {
    let tests: Vec<(u64, f64)> = traj
        .records
        .iter()
        .filter_map(|r| r.test_err.map(|e| (r.step, e)))
        .collect();
    let &(_, final_error) = tests
        .last()
        .ok_or_else(|| Error::InvalidDataset("trajectory has no test evaluations".into()))?;
    let mut best = 0;
    for (i, &(_, e)) in tests.iter().enumerate() {
        if e < tests[best].1 {
            best = i;
        }
    }
    Ok(EarlyStop {
        final_error,
        min_error: tests[best].1,
        min_index: best,
        min_step: tests[best].0,
    })
}

/// Endpoint classification by the fraction of unsatisfied constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunClass {
    /// `N_Δ = 0`.
    Fitting,
    /// `N_Δ > 0.1·N`.
    Jammed,
    /// `0 < N_Δ ≤ 0.1·N`.
    Unresolved,
}

pub fn classify(n_delta: usize, n_params: usize) -> RunClass {
    if n_delta == 0 {
        RunClass::Fitting
    } else if n_delta as f64 > 0.1 * n_params as f64 {
        RunClass::Jammed
    } else {
        RunClass::Unresolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss(&MarginVector::from_deltas(vec![1.0; 4])), 0.5);
        assert_eq!(hinge_loss(&MarginVector::from_deltas(vec![0.5])), 0.125);
        let m = MarginVector::from_deltas(vec![-0.1, 0.0, -3.0]);
        assert_eq!(hinge_loss(&m), 0.0);
        assert_eq!(m.n_delta(), 0);
    }

    #[test]
    fn tie_counts_as_error() {
        assert_eq!(error_fraction(&[0.0, 0.0], &[1, -1]), 1.0);
        assert_eq!(error_fraction(&[0.3, -2.0], &[1, -1]), 0.0);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify(0, 100), RunClass::Fitting);
        assert_eq!(classify(10, 100), RunClass::Unresolved);
        assert_eq!(classify(11, 100), RunClass::Jammed);
    }

    #[test]
    fn early_stop_example() {
        let mut records = Vec::new();
        for (i, e) in [0.4, 0.2, 0.35].into_iter().enumerate() {
            records.push(TrainRecord {
                step: 10 * i as u64,
                loss: 0.0,
                n_delta: 0,
                train_err: 0.0,
                test_err: Some(e),
            });
        }
        let c = crate::net::NetworkConfig::new(1, 1, 1, crate::net::Activation::Relu).unwrap();
        let traj = TrainTrajectory {
            records,
            params: Params::zeros(c).unwrap(),
            stop: StopReason::StepsExhausted,
            steps_run: 20,
        };
        let s = early_stop_summary(&traj).unwrap();
        assert_eq!((s.final_error, s.min_error, s.min_index, s.min_step), (0.35, 0.2, 1, 10));
        assert!((s.gap() - 0.15).abs() < 1e-15);
    }
}
