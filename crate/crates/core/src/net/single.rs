//! Single-input entry points on top of the batched tape.

use alloc::vec;
use alloc::vec::Vec;

use super::tape::BatchTape;
use super::Params;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Output and hidden preactivations for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    pub output: f64,
    /// One vector of length `h` per hidden layer.
    pub preactivations: Vec<Vec<f64>>,
}

fn check_input(params: &Params, x: &[f64]) -> Result<()> {
    let d = params.config().d;
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.len(),
        });
    }
    Ok(())
}

fn check_params_vec(params: &Params, v: &[f64]) -> Result<()> {
    if v.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: v.len(),
        });
    }
    Ok(())
}

pub fn forward(params: &Params, x: &[f64]) -> Result<ForwardRecord> {
    check_input(params, x)?;
    let tape = BatchTape::forward(params, x, 1);
    Ok(ForwardRecord {
        output: tape.outputs()[0],
        preactivations: (0..tape.hidden_layers())
            .map(|i| tape.preactivations(i).to_vec())
            .collect(),
    })
}

/// `∇_W f(x)`, flat.
pub fn grad_params(params: &Params, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let tape = BatchTape::forward(params, x, 1);
    let g = tape.backward(params, &[1.0]);
    Ok(tape.gradient(params, x, &g))
}

/// `∇_x f(x)`.
pub fn grad_input(params: &Params, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let tape = BatchTape::forward(params, x, 1);
    let g = tape.backward(params, &[1.0]);
    Ok(tape.input_gradients(params, &g))
}

/// `(∇∇_W f) v`, exact.
pub fn hessian_vector_product(params: &Params, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    check_params_vec(params, v)?;
    let tape = BatchTape::forward(params, x, 1);
    let g = tape.backward(params, &[1.0]);
    let rt = tape.r_forward(params, x, Some(v), None);
    let rg = tape.r_backward(params, &g, &rt, Some(v));
    Ok(tape.r_gradient(params, x, &g, &rt, &rg))
}

/// Full `N×N` Hessian of `f` with respect to the parameters, symmetrized.
pub fn hessian_of_f(params: &Params, x: &[f64]) -> Result<Matrix> {
    check_input(params, x)?;
    let n = params.len();
    let tape = BatchTape::forward(params, x, 1);
    let g = tape.backward(params, &[1.0]);
    let mut h = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let rt = tape.r_forward(params, x, Some(&e), None);
        let rg = tape.r_backward(params, &g, &rt, Some(&e));
        let col = tape.r_gradient(params, x, &g, &rt, &rg);
        // Row j of a symmetric matrix equals column j.
        h.row_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    h.symmetrize();
    Ok(h)
}

/// `∂_{x_n} ∇_W f(x)`: a `d×N` matrix, row `n` for input coordinate `n`.
pub fn mixed_input_derivatives(params: &Params, x: &[f64]) -> Result<Matrix> {
    check_input(params, x)?;
    let d = params.config().d;
    let tape = BatchTape::forward(params, x, 1);
    let g = tape.backward(params, &[1.0]);
    let mut out = Matrix::zeros(d, params.len());
    let mut e = vec![0.0; d];
    for k in 0..d {
        e[k] = 1.0;
        let rt = tape.r_forward(params, x, None, Some(&e));
        let rg = tape.r_backward(params, &g, &rt, None);
        let m = tape.r_per_sample_gradients(params, x, Some(&e), &g, &rt, &rg);
        out.row_mut(k).copy_from_slice(m.row(0));
        e[k] = 0.0;
    }
    Ok(out)
}
