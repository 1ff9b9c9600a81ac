//! Landscape reports written by `spectrum`, `cusps` and `neff`.

use jamlab_core::data::Dataset;
use jamlab_core::landscape::{
    count_spectrum, cusp_sensitivity, effective_dim, hessian_parts, odd_trace_from_matrix, preactivation_histogram, CuspReport, EffectiveDim,
    LayerHistogram, MatrixTag, OddTrace, SpectrumReport, StabilityBounds, stability_bounds_report, EPS_CUSP_REL, TAU_EIG, TAU_RANK,
};
use jamlab_core::linalg::symmetric_eigenvalues;
use jamlab_core::net::{Activation, Params};
use jamlab_core::objective::margins;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Spectra of the loss Hessian and its two parts at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBundle {
    pub n: usize,
    pub p: usize,
    pub n_delta: usize,
    pub hessian: SpectrumReport,
    pub h0: SpectrumReport,
    pub hp: SpectrumReport,
    pub odd_traces: Vec<OddTrace>,
    /// ReLU only.
    pub stability: Option<StabilityBounds>,
}

pub fn spectrum_bundle(params: &Params, data: &Dataset) -> Result<SpectrumBundle> {
    let (h0, hp) = hessian_parts(params, data)?;
    let mut hl = h0.clone();
    for (a, b) in hl.as_mut_slice().iter_mut().zip(hp.as_slice()) {
        *a += b;
    }
    let hp_eigs = symmetric_eigenvalues(&hp)?;
    let odd_traces = [1, 3].iter().map(|&k| odd_trace_from_matrix(&hp, &hp_eigs, k)).collect();
    let hp_rep = count_spectrum(hp_eigs, TAU_EIG, MatrixTag::Hp);
    let hessian = count_spectrum(symmetric_eigenvalues(&hl)?, TAU_EIG, MatrixTag::HL);
    let h0_rep = count_spectrum(symmetric_eigenvalues(&h0)?, TAU_EIG, MatrixTag::H0);
    let n_delta = margins(params, data)?.n_delta();
    let stability = if params.config().activation == Activation::Relu {
        let c = cusp_sensitivity(params, data, &[EPS_CUSP_REL])?;
        Some(stability_bounds_report(&hp_rep, n_delta, c[0].n_c, params.len(), data.len(), 0.1)?)
    } else {
        None
    };
    Ok(SpectrumBundle { n: params.len(), p: data.len(), n_delta, hessian, h0: h0_rep, hp: hp_rep, odd_traces, stability })
}

/// Cusp counts at `ε/10, ε, 10ε` and pre-activation histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspBundle {
    pub train: Vec<CuspReport>,
    pub test: Option<Vec<CuspReport>>,
    pub histograms: HistogramReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub train: Vec<LayerHistogram>,
    pub test: Option<Vec<LayerHistogram>>,
}

pub const CUSP_EPS_GRID: [f64; 3] = [EPS_CUSP_REL / 10.0, EPS_CUSP_REL, EPS_CUSP_REL * 10.0];

pub fn cusp_bundle(params: &Params, train: &Dataset, test: Option<&Dataset>, bins: usize) -> Result<CuspBundle> {
    let tr = preactivation_histogram(params, train, bins, None, EPS_CUSP_REL)?;
    // Test histograms share the training range so the two overlay.
    let range = tr.iter().map(|h| h.edges.last().copied().unwrap_or(1.0)).fold(0.0, f64::max);
    let te = test.map(|t| preactivation_histogram(params, t, bins, Some(range), EPS_CUSP_REL)).transpose()?;
    Ok(CuspBundle {
        train: cusp_sensitivity(params, train, &CUSP_EPS_GRID)?,
        test: test.map(|t| cusp_sensitivity(params, t, &CUSP_EPS_GRID)).transpose()?,
        histograms: HistogramReport { train: tr, test: te },
    })
}

/// One point of the `N_eff` versus `N` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeffRow {
    pub d: usize,
    pub h: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub patterns: usize,
    pub n: usize,
    pub hidden_neurons: usize,
    pub n_minus_neurons: usize,
    pub n_eff: usize,
}

pub fn neff_row(params: &Params, data: &Dataset) -> Result<(NeffRow, EffectiveDim)> {
    let c = params.config();
    let e = effective_dim(params, data, TAU_RANK)?;
    let row = NeffRow {
        d: c.d,
        h: c.h,
        depth: c.depth,
        patterns: data.len(),
        n: c.count_params(),
        hidden_neurons: c.hidden_neurons(),
        n_minus_neurons: c.count_params() - c.hidden_neurons(),
        n_eff: e.n_eff,
    };
    Ok((row, e))
}
