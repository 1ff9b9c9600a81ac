use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dataset, cross_entropy_from_outputs, cross_entropy_seeds, error_fraction, hinge_gradient_from_tape, hinge_loss, MarginVector};
use crate::data::Dataset;
use crate::net::{BatchTape, Params};
use crate::rng::{stream, tags};
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e−8.
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Hinge,
    CrossEntropy,
}

fn default_decay_factor() -> f64 {
    0.1
}

fn one() -> u64 {
    1
}

/// Optimizer, step budget and recording cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub optimizer: Optimizer,
    pub steps: u64,
    pub learning_rate: f64,
    /// Multiply the rate by `lr_decay_factor` every this many steps.
    #[serde(default)]
    pub lr_decay_every: Option<u64>,
    #[serde(default = "default_decay_factor")]
    pub lr_decay_factor: f64,
    /// Mini-batch size; `None` is the full batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default = "one")]
    pub test_eval_every: u64,
    /// Seeds the mini-batch order.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loss: LossKind,
}

impl TrainSchedule {
    pub fn full_batch(optimizer: Optimizer, steps: u64, learning_rate: f64) -> Self {
        Self {
            optimizer,
            steps,
            learning_rate,
            lr_decay_every: None,
            lr_decay_factor: default_decay_factor(),
            batch_size: None,
            record_every: 1,
            test_eval_every: 1,
            seed: 0,
            loss: LossKind::Hinge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSchedule(m.into()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if self.lr_decay_every == Some(0) {
            return bad("lr_decay_every must be at least 1");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor.is_finite()) {
            return bad("lr_decay_factor must be positive and finite");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1");
        }
        if self.record_every == 0 || self.test_eval_every == 0 {
            return bad("record_every and test_eval_every must be at least 1");
        }
        Ok(())
    }

    /// Learning rate in force for update number `t` (0-based).
    pub fn rate_at(&self, t: u64) -> f64 {
        match self.lr_decay_every {
            Some(k) => {
                let mut lr = self.learning_rate;
                for _ in 0..(t / k) {
                    lr *= self.lr_decay_factor;
                }
                lr
            }
            None => self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    StepsExhausted,
    ZeroLoss,
}

/// One row of a trajectory. `step` counts completed updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: u64,
    pub loss: f64,
    pub n_delta: usize,
    pub train_err: f64,
    pub test_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrajectory {
    pub records: Vec<TrainRecord>,
    pub params: Params,
    pub stop: StopReason,
    pub steps_run: u64,
}

impl TrainTrajectory {
    pub fn last(&self) -> &TrainRecord {
        self.records.last().expect("a trajectory always has its endpoint")
    }
}

struct Evaluation {
    loss: f64,
    n_delta: usize,
    train_err: f64,
}

/// Loss, constraint count and error on the full training set, plus the
/// loss gradient when `want_grad`.
fn evaluate(params: &Params, data: &Dataset, kind: LossKind, want_grad: bool) -> (Evaluation, Option<Vec<f64>>) {
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    let m = MarginVector::from_outputs(tape.outputs(), data.labels());
    let train_err = error_fraction(tape.outputs(), data.labels());
    let n_delta = m.n_delta();
    let (loss, grad) = match kind {
        LossKind::Hinge => (
            hinge_loss(&m),
            want_grad.then(|| hinge_gradient_from_tape(params, data, &tape, &m)),
        ),
        LossKind::CrossEntropy => (
            cross_entropy_from_outputs(tape.outputs(), data.labels()),
            want_grad.then(|| {
                let s = cross_entropy_seeds(tape.outputs(), data.labels());
                let g = tape.backward(params, &s);
                tape.gradient(params, data.inputs(), &g)
            }),
        ),
    };
    (
        Evaluation {
            loss,
            n_delta,
            train_err,
        },
        grad,
    )
}

fn batch_gradient(params: &Params, batch: &Dataset, kind: LossKind) -> Vec<f64> {
    evaluate(params, batch, kind, true).1.expect("gradient requested")
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    b1t: f64,
    b2t: f64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            b1t: 1.0,
            b2t: 1.0,
        }
    }

    fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.b1t *= ADAM_BETA1;
        self.b2t *= ADAM_BETA2;
        let c1 = 1.0 / (1.0 - self.b1t);
        let c2 = 1.0 / (1.0 - self.b2t);
        for i in 0..w.len() {
            let gi = g[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * gi;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let mh = self.m[i] * c1;
            let vh = self.v[i] * c2;
            w[i] -= lr * mh / (libm::sqrt(vh) + ADAM_EPS);
        }
    }
}

/// Trains `params` on `data`. With the hinge loss, training stops as soon as
/// every margin is satisfied (`N_Δ = 0`, `ℒ = 0` exactly); mini-batch runs
/// check this at recording steps. A non-finite loss aborts with
/// [`Error::Diverged`].
pub fn train(mut params: Params, data: &Dataset, schedule: &TrainSchedule, test: Option<&Dataset>) -> Result<TrainTrajectory> {
    schedule.validate()?;
    check_dataset(&params, data)?;
    if let Some(t) = test {
        check_dataset(&params, t)?;
    }
    let n = params.len();
    let p = data.len();
    let kind = schedule.loss;
    let batch = schedule.batch_size.filter(|&b| b < p);
    let mut adam = matches!(schedule.optimizer, Optimizer::Adam).then(|| Adam::new(n));
    let mut rng = stream(schedule.seed, tags::SHUFFLE);
    let mut order: Vec<usize> = (0..p).collect();
    let mut cursor = p;
    let mut records = Vec::new();

    let record = |step: u64, ev: &Evaluation, params: &Params, force_test: bool| -> Result<TrainRecord> {
        let test_err = match test {
            Some(t) if force_test || step % schedule.test_eval_every == 0 => Some(super::test_error(params, t)?),
            _ => None,
        };
        Ok(TrainRecord {
            step,
            loss: ev.loss,
            n_delta: ev.n_delta,
            train_err: ev.train_err,
            test_err,
        })
    };

    let mut t: u64 = 0;
    loop {
        let at_record = t % schedule.record_every == 0 || t == schedule.steps;
        // Full-batch runs evaluate every step (the gradient needs the same
        // forward pass); mini-batch runs only at recording steps.
        let full = if batch.is_none() || at_record {
            let (ev, grad) = evaluate(&params, data, kind, batch.is_none() && t < schedule.steps);
            if !ev.loss.is_finite() {
                return Err(Error::Diverged { step: t, loss: ev.loss });
            }
            let zero = kind == LossKind::Hinge && ev.n_delta == 0;
            if at_record || zero {
                records.push(record(t, &ev, &params, zero || t == schedule.steps)?);
            }
            if zero {
                return Ok(TrainTrajectory {
                    records,
                    params,
                    stop: StopReason::ZeroLoss,
                    steps_run: t,
                });
            }
            grad
        } else {
            None
        };
        if t == schedule.steps {
            return Ok(TrainTrajectory {
                records,
                params,
                stop: StopReason::StepsExhausted,
                steps_run: t,
            });
        }

        let grad = match (full, batch) {
            (Some(g), None) => g,
            (_, Some(b)) => {
                if cursor + b > p {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let mb = data.subset(&order[cursor..cursor + b])?;
                cursor += b;
                batch_gradient(&params, &mb, kind)
            }
            (None, None) => unreachable!("full-batch gradient is computed every step"),
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: t,
                loss: f64::NAN,
            });
        }
        let lr = schedule.rate_at(t);
        match (&mut adam, schedule.optimizer) {
            (Some(a), _) => a.step(params.flat_mut(), &grad, lr),
            (None, _) => crate::linalg::axpy(-lr, &grad, params.flat_mut()),
        }
        t += 1;
    }
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            StopReason::StepsExhausted => "steps_exhausted",
            StopReason::ZeroLoss => "zero_loss",
        })
    }
}
