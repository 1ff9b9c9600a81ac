//! The loss Hessian `ℋ = ℋ₀ + ℋₚ`, its spectra, cusp counts, the effective
//! number of parameters and the stability inequalities at an endpoint.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::{gemm, singular_values, symmetric_eigenvalues, Matrix};
use crate::net::{Activation, BatchTape, Params};
use crate::objective::{check_dataset, hinge_seeds, MarginVector};
use crate::{Error, Result};

/// Relative eigenvalue threshold (fraction of the spectral radius).
pub const TAU_EIG: f64 = 1e-8;
/// Relative singular-value threshold (fraction of `σ_max`).
pub const TAU_RANK: f64 = 1e-8;
/// Cusp tolerance relative to the RMS preactivation of the layer.
pub const EPS_CUSP_REL: f64 = 1e-6;
/// Largest `N` for which dense Hessians are assembled.
pub const MAX_DENSE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixTag {
    #[serde(rename = "H_L")]
    HL,
    H0,
    Hp,
}

fn check_size(params: &Params) -> Result<()> {
    if params.len() > MAX_DENSE {
        return Err(Error::TooLarge(params.len()));
    }
    Ok(())
}

/// Forward pass restricted to the unsatisfied patterns.
struct ActiveSet {
    tape: BatchTape,
    inputs: Vec<f64>,
    /// `∂ℒ/∂f_μ` for the kept patterns.
    seeds: Vec<f64>,
    p_total: usize,
}

fn active_set(params: &Params, data: &Dataset) -> Result<ActiveSet> {
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    let m = MarginVector::from_outputs(tape.outputs(), data.labels());
    let active = m.active();
    let all = hinge_seeds(&m, data.labels());
    let (tape, inputs) = tape.select(data.inputs(), &active);
    Ok(ActiveSet {
        tape,
        inputs,
        seeds: active.iter().map(|&i| all[i]).collect(),
        p_total: data.len(),
    })
}

/// `ℋ₀ = (1/P) Σ_{Δ_μ>0} ∇f(x_μ) ⊗ ∇f(x_μ)`.
pub fn hessian_h0(params: &Params, data: &Dataset) -> Result<Matrix> {
    check_size(params)?;
    let a = active_set(params, data)?;
    Ok(h0_from_active(params, &a))
}

fn h0_from_active(params: &Params, a: &ActiveSet) -> Matrix {
    let n = params.len();
    let mut h = Matrix::zeros(n, n);
    let pa = a.tape.len();
    if pa == 0 {
        return h;
    }
    let g = a.tape.backward(params, &vec![1.0; pa]);
    let j = a.tape.per_sample_gradients(params, &a.inputs, &g);
    gemm(
        n,
        pa,
        n,
        1.0 / a.p_total as f64,
        (j.as_slice(), 1, n),
        (j.as_slice(), n, 1),
        0.0,
        (h.as_mut_slice(), n, 1),
    );
    h.symmetrize();
    h
}

/// `ℋₚ = (1/P) Σ_{Δ_μ>0} Δ_μ ∇∇Δ_μ = −(1/P) Σ Δ_μ y_μ ∇∇f(x_μ)`, one exact
/// Hessian-vector product per basis vector.
pub fn hessian_hp(params: &Params, data: &Dataset) -> Result<Matrix> {
    check_size(params)?;
    let a = active_set(params, data)?;
    Ok(hp_from_active(params, &a))
}

fn hp_from_active(params: &Params, a: &ActiveSet) -> Matrix {
    let n = params.len();
    let mut h = Matrix::zeros(n, n);
    if a.tape.is_empty() {
        return h;
    }
    let g = a.tape.backward(params, &a.seeds);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let rt = a.tape.r_forward(params, &a.inputs, Some(&e), None);
        let rg = a.tape.r_backward(params, &g, &rt, Some(&e));
        let col = a.tape.r_gradient(params, &a.inputs, &g, &rt, &rg);
        h.row_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    h.symmetrize();
    h
}

/// `(ℋ₀, ℋₚ)` from a single forward pass.
pub fn hessian_parts(params: &Params, data: &Dataset) -> Result<(Matrix, Matrix)> {
    check_size(params)?;
    let a = active_set(params, data)?;
    Ok((h0_from_active(params, &a), hp_from_active(params, &a)))
}

/// Full loss Hessian `ℋ₀ + ℋₚ`.
pub fn hessian_loss(params: &Params, data: &Dataset) -> Result<Matrix> {
    let (mut h0, hp) = hessian_parts(params, data)?;
    h0.as_mut_slice()
        .iter_mut()
        .zip(hp.as_slice())
        .for_each(|(a, b)| *a += b);
    Ok(h0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub tag: MatrixTag,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub n_minus: usize,
    pub n_plus: usize,
    pub n_zero: usize,
    /// `N₋ / N`.
    pub c0_hat: f64,
    pub tau_eig: f64,
    /// Absolute threshold `τ·max|λ|` used for the counts.
    pub threshold: f64,
}

/// Dense symmetric eigenvalues, counted against `±τ·max|λ|`.
pub fn spectrum(matrix: &Matrix, tau_eig: f64, tag: MatrixTag) -> Result<SpectrumReport> {
    let eigenvalues = symmetric_eigenvalues(matrix)?;
    Ok(count_spectrum(eigenvalues, tau_eig, tag))
}

pub fn count_spectrum(eigenvalues: Vec<f64>, tau_eig: f64, tag: MatrixTag) -> SpectrumReport {
    let radius = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = tau_eig * radius;
    let n_minus = eigenvalues.iter().filter(|&&v| v < -threshold).count();
    let n_plus = eigenvalues.iter().filter(|&&v| v > threshold).count();
    let n = eigenvalues.len();
    SpectrumReport {
        tag,
        n_zero: n - n_minus - n_plus,
        c0_hat: if n == 0 { 0.0 } else { n_minus as f64 / n as f64 },
        eigenvalues,
        n_minus,
        n_plus,
        tau_eig,
        threshold,
    }
}

/// Normalized moment `tr(ℋₚⁿ)/(N sⁿ)` with `s` the RMS eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddTrace {
    pub order: u32,
    pub value: f64,
    /// For `n = 1`, the same quantity from the diagonal of `ℋₚ`.
    pub from_diagonal: Option<f64>,
}

/// `Σλⁿ / (N sⁿ)`, `s² = Σλ²/N`; zero for the zero matrix.
pub fn normalized_moment(eigenvalues: &[f64], order: u32) -> f64 {
    let n = eigenvalues.len() as f64;
    let s2: f64 = eigenvalues.iter().map(|v| v * v).sum::<f64>() / n;
    if !(s2 > 0.0) {
        return 0.0;
    }
    let s = libm::sqrt(s2);
    eigenvalues.iter().map(|v| libm::pow(v / s, order as f64)).sum::<f64>() / n
}

pub fn odd_trace_from_matrix(hp: &Matrix, eigenvalues: &[f64], order: u32) -> OddTrace {
    let value = normalized_moment(eigenvalues, order);
    let from_diagonal = (order == 1).then(|| {
        let n = eigenvalues.len() as f64;
        let s2: f64 = eigenvalues.iter().map(|v| v * v).sum::<f64>() / n;
        if s2 > 0.0 {
            hp.trace() / (n * libm::sqrt(s2))
        } else {
            0.0
        }
    });
    OddTrace {
        order,
        value,
        from_diagonal,
    }
}

pub fn odd_trace_check(params: &Params, data: &Dataset, order: u32) -> Result<OddTrace> {
    if order % 2 == 0 {
        return Err(Error::InvalidConfig(format!("trace order {order} is not odd")));
    }
    let hp = hessian_hp(params, data)?;
    let eig = symmetric_eigenvalues(&hp)?;
    Ok(odd_trace_from_matrix(&hp, &eig, order))
}

/// Zero preactivations of the hidden ReLU units over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    /// `(pattern, neuron)` pairs with `|a| ≤ ε`.
    pub n_c: usize,
    /// Neurons with at least one such pattern.
    pub n_c_neurons: usize,
    /// `n_c / N`.
    pub beta_hat: f64,
    pub beta_hat_neurons: f64,
    pub eps_rel: f64,
    /// Absolute tolerance used in each hidden layer.
    pub eps_per_layer: Vec<f64>,
    pub n_c_per_layer: Vec<usize>,
    pub n_params: usize,
}

fn require_relu(params: &Params) -> Result<()> {
    if params.config().activation != Activation::Relu {
        return Err(Error::InvalidConfig("cusp counting needs ReLU units".into()));
    }
    Ok(())
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// `ε = eps_rel · RMS(layer preactivations)` per hidden layer.
pub fn count_cusps(params: &Params, data: &Dataset, eps_rel: f64) -> Result<CuspReport> {
    require_relu(params)?;
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    Ok(cusps_from_tape(&tape, params.len(), params.config().h, eps_rel))
}

fn cusps_from_tape(tape: &BatchTape, n_params: usize, h: usize, eps_rel: f64) -> CuspReport {
    let mut eps_per_layer = Vec::new();
    let mut n_c_per_layer = Vec::new();
    let mut n_c_neurons = 0;
    for l in 0..tape.hidden_layers() {
        let a = tape.preactivations(l);
        let eps = eps_rel * rms(a);
        let mut hit = vec![false; h];
        let mut count = 0;
        for row in a.chunks_exact(h) {
            for (k, &v) in row.iter().enumerate() {
                if v.abs() <= eps {
                    count += 1;
                    hit[k] = true;
                }
            }
        }
        n_c_neurons += hit.iter().filter(|&&b| b).count();
        eps_per_layer.push(eps);
        n_c_per_layer.push(count);
    }
    let n_c = n_c_per_layer.iter().sum();
    CuspReport {
        n_c,
        n_c_neurons,
        beta_hat: n_c as f64 / n_params as f64,
        beta_hat_neurons: n_c_neurons as f64 / n_params as f64,
        eps_rel,
        eps_per_layer,
        n_c_per_layer,
        n_params,
    }
}

/// Cusp counts at several relative tolerances (one forward pass).
pub fn cusp_sensitivity(params: &Params, data: &Dataset, eps_rels: &[f64]) -> Result<Vec<CuspReport>> {
    require_relu(params)?;
    check_dataset(params, data)?;
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    Ok(eps_rels
        .iter()
        .map(|&e| cusps_from_tape(&tape, params.len(), params.config().h, e))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerHistogram {
    /// `bins + 1` edges over `[-range, range]`.
    pub edges: Vec<f64>,
    /// Values with `|a| > ε` per bin; values outside the range are clamped
    /// into the end bins.
    pub counts: Vec<usize>,
    /// Values with `|a| ≤ ε`, kept out of the bins.
    pub zero_count: usize,
    pub eps: f64,
    pub total: usize,
}

impl LayerHistogram {
    pub fn zero_mass(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.zero_count as f64 / self.total as f64
        }
    }
}

/// Per-layer preactivation histograms. `range = None` uses the largest
/// magnitude in each layer.
pub fn preactivation_histogram(params: &Params, data: &Dataset, bins: usize, range: Option<f64>, eps_rel: f64) -> Result<Vec<LayerHistogram>> {
    check_dataset(params, data)?;
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let tape = BatchTape::forward(params, data.inputs(), data.len());
    let mut out = Vec::new();
    for l in 0..tape.hidden_layers() {
        let a = tape.preactivations(l);
        let eps = eps_rel * rms(a);
        let r = range.unwrap_or_else(|| a.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(f64::MIN_POSITIVE);
        let width = 2.0 * r / bins as f64;
        let edges = (0..=bins).map(|i| -r + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        let mut zero_count = 0;
        for &v in a {
            if v.abs() <= eps {
                zero_count += 1;
                continue;
            }
            let k = libm::floor((v + r) / width);
            let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            counts[k] += 1;
        }
        out.push(LayerHistogram {
            edges,
            counts,
            zero_count,
            eps,
            total: a.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDim {
    pub n_eff: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tau_rank: f64,
    pub diagnostic: Option<String>,
}

/// The `N × P(d+1)` matrix `G` (returned transposed, one row per column of
/// `G`): for each pattern, `∇_W f(x_μ)` followed by
/// `∇_W f(x_μ) + ∂_{x_n} ∇_W f(x_μ)` for `n = 1..d`. The mixed derivatives
/// are exact forward-over-reverse products.
pub fn extended_gradients(params: &Params, data: &Dataset) -> Result<Matrix> {
    check_dataset(params, data)?;
    let (p, d, n) = (data.len(), data.dim(), params.len());
    let x = data.inputs();
    let tape = BatchTape::forward(params, x, p);
    let g = tape.backward(params, &vec![1.0; p]);
    let base = tape.per_sample_gradients(params, x, &g);
    let mut out = Matrix::zeros(p * (d + 1), n);
    for mu in 0..p {
        out.row_mut(mu * (d + 1)).copy_from_slice(base.row(mu));
    }
    let mut dx = vec![0.0; p * d];
    for k in 0..d {
        dx.iter_mut().enumerate().for_each(|(i, v)| *v = if i % d == k { 1.0 } else { 0.0 });
        let rt = tape.r_forward(params, x, None, Some(&dx));
        let rg = tape.r_backward(params, &g, &rt, None);
        let mixed = tape.r_per_sample_gradients(params, x, Some(&dx), &g, &rt, &rg);
        for mu in 0..p {
            let row = out.row_mut(mu * (d + 1) + 1 + k);
            row.iter_mut()
                .zip(base.row(mu).iter().zip(mixed.row(mu)))
                .for_each(|(o, (a, b))| *o = a + b);
        }
    }
    Ok(out)
}

/// `N_eff = #{σ > τ σ_max}` for the singular values of `G`.
pub fn effective_dim(params: &Params, data: &Dataset, tau_rank: f64) -> Result<EffectiveDim> {
    let g = extended_gradients(params, data)?;
    let singular_values = singular_values(&g)?;
    let smax = singular_values.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Ok(EffectiveDim {
            n_eff: 0,
            singular_values,
            tau_rank,
            diagnostic: Some("G is identically zero".into()),
        });
    }
    let n_eff = singular_values.iter().filter(|&&s| s > tau_rank * smax).count();
    // Gap between the last kept and first dropped value, for the record.
    let diagnostic = singular_values.get(n_eff).map(|&next| {
        format!(
            "sigma_max={smax:e}; last kept {:e}; first dropped {next:e}",
            singular_values[n_eff - 1]
        )
    });
    Ok(EffectiveDim {
        n_eff,
        singular_values,
        tau_rank,
        diagnostic,
    })
}

/// The stability inequalities evaluated at one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityBounds {
    pub n: usize,
    pub p: usize,
    pub n_delta: usize,
    pub n_minus: usize,
    pub n_c: usize,
    pub c0_hat: f64,
    pub beta_hat: f64,
    /// `P ≥ N_Δ`.
    pub capacity: bool,
    /// `N_Δ ≥ N₋ − N_c`.
    pub cusp_corrected: bool,
    /// `N_Δ ≥ N(Ĉ₀ − β̂)·(1 − slack)`.
    pub fraction_form: bool,
    pub slack: f64,
    pub violations: Vec<String>,
}

/// `n_c` is the cusp count used in the corrected bound. `hp` must be the
/// spectrum of `ℋₚ`. A record with `N_Δ > P` is rejected.
pub fn stability_bounds_report(hp: &SpectrumReport, n_delta: usize, n_c: usize, n: usize, p: usize, slack: f64) -> Result<StabilityBounds> {
    if n_delta > p {
        return Err(Error::Inconsistent(format!("N_delta = {n_delta} exceeds P = {p}")));
    }
    if hp.eigenvalues.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: hp.eigenvalues.len(),
        });
    }
    let beta_hat = n_c as f64 / n as f64;
    let capacity = p >= n_delta;
    let cusp_corrected = n_delta + n_c >= hp.n_minus;
    let target = n as f64 * (hp.c0_hat - beta_hat);
    let fraction_form = n_delta as f64 >= target * (1.0 - slack);
    let mut violations = Vec::new();
    if !cusp_corrected {
        violations.push(format!("N_delta={n_delta} < N_minus - N_c = {} - {n_c}", hp.n_minus));
    }
    if !fraction_form {
        violations.push(format!("N_delta={n_delta} < N(C0-beta)(1-slack) = {:.1}", target * (1.0 - slack)));
    }
    Ok(StabilityBounds {
        n,
        p,
        n_delta,
        n_minus: hp.n_minus,
        n_c,
        c0_hat: hp.c0_hat,
        beta_hat,
        capacity,
        cusp_corrected,
        fraction_form,
        slack,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_diag_example() {
        let m = Matrix::from_diagonal(&[1.0, -1.0, 0.0]);
        let s = spectrum(&m, TAU_EIG, MatrixTag::HL).unwrap();
        assert_eq!((s.n_minus, s.n_plus, s.n_zero), (1, 1, 1));
        assert!((s.c0_hat - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn moments() {
        assert_eq!(normalized_moment(&[0.0, 0.0], 3), 0.0);
        assert!(normalized_moment(&[1.0, -1.0, 2.0, -2.0], 3).abs() < 1e-15);
        assert!((normalized_moment(&[2.0, 2.0], 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_record() {
        let s = count_spectrum(vec![0.0; 4], TAU_EIG, MatrixTag::Hp);
        assert!(matches!(stability_bounds_report(&s, 5, 0, 4, 3, 0.1), Err(Error::Inconsistent(_))));
        let ok = stability_bounds_report(&s, 0, 0, 4, 3, 0.1).unwrap();
        assert!(ok.capacity && ok.cusp_corrected && ok.fraction_form);
    }
}
