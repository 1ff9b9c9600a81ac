//! Batched forward, reverse and forward-over-reverse passes.
//!
//! Patterns are rows: the inputs form a `P×d` row-major block and each layer
//! keeps a `P×fan_out` block of preactivations. The reverse pass carries the
//! signals `Gᵢ = ∂(Σ_μ s_μ f_μ)/∂aᵢ` for per-pattern seeds `s`. The
//! R-operator (Pearlmutter) differentiates the reverse pass along a tangent
//! `(dW, dx)`, which yields exact Hessian-vector products and the mixed
//! input/parameter derivatives.

use alloc::vec;
use alloc::vec::Vec;

use super::{Activation, Params};
use crate::linalg::{gemm, Matrix};

/// Forward pass over `p` patterns.
#[derive(Debug, Clone)]
pub struct BatchTape {
    p: usize,
    activation: Activation,
    /// `pre[i]`: `p × fan_out(i)`; the last entry is the output column.
    pre: Vec<Vec<f64>>,
    /// `post[i] = ρ(pre[i])` for hidden layers.
    post: Vec<Vec<f64>>,
}

/// Tangent of the forward pass.
#[derive(Debug, Clone)]
pub struct RTape {
    /// `None` where the tangent of the preactivations vanishes identically.
    ra: Vec<Option<Vec<f64>>>,
    rz: Vec<Option<Vec<f64>>>,
}

impl RTape {
    /// Directional derivative of the outputs.
    pub fn outputs(&self, p: usize) -> Vec<f64> {
        self.ra.last().cloned().flatten().unwrap_or_else(|| vec![0.0; p])
    }
}

impl BatchTape {
    pub fn forward(params: &Params, inputs: &[f64], p: usize) -> Self {
        let act = params.config().activation;
        let nl = params.num_layers();
        assert_eq!(inputs.len(), p * params.config().d, "batch input size");
        let mut pre = Vec::with_capacity(nl);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(nl - 1);
        for i in 0..nl {
            let layer = params.layer(i);
            let z = if i == 0 { inputs } else { &post[i - 1][..] };
            let mut a = vec![0.0; p * layer.fan_out];
            gemm(
                p,
                layer.fan_in,
                layer.fan_out,
                1.0,
                (z, layer.fan_in, 1),
                (layer.weights, 1, layer.fan_in),
                0.0,
                (&mut a, layer.fan_out, 1),
            );
            for row in a.chunks_exact_mut(layer.fan_out) {
                for (v, b) in row.iter_mut().zip(layer.bias) {
                    *v -= b;
                }
            }
            if i + 1 < nl {
                post.push(a.iter().map(|&v| act.apply(v)).collect());
            }
            pre.push(a);
        }
        Self {
            p,
            activation: act,
            pre,
            post,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    /// Network outputs, one per pattern.
    pub fn outputs(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }

    /// Hidden preactivations of layer `i` (`p × h`).
    pub fn preactivations(&self, i: usize) -> &[f64] {
        &self.pre[i]
    }

    pub fn hidden_layers(&self) -> usize {
        self.post.len()
    }

    fn layer_input<'a>(&'a self, inputs: &'a [f64], i: usize) -> &'a [f64] {
        if i == 0 {
            inputs
        } else {
            &self.post[i - 1]
        }
    }

    /// `ρ'(aᵢ)` for hidden layer `i`.
    fn first_derivs(&self, i: usize) -> Vec<f64> {
        match self.activation {
            // 1 - tanh² from the stored post-activations: same bits as
            // Activation::derivative, without re-evaluating tanh.
            Activation::Tanh => self.post[i].iter().map(|t| 1.0 - t * t).collect(),
            act => self.pre[i].iter().map(|&a| act.derivative(a)).collect(),
        }
    }

    fn second_derivs(&self, i: usize) -> Option<Vec<f64>> {
        match self.activation {
            Activation::Tanh => Some(self.post[i].iter().map(|t| -2.0 * t * (1.0 - t * t)).collect()),
            _ => None,
        }
    }

    /// Tape restricted to the listed patterns, with the matching input rows.
    pub fn select(&self, inputs: &[f64], rows: &[usize]) -> (BatchTape, Vec<f64>) {
        let d = inputs.len() / self.p.max(1);
        let gather = |src: &[f64], width: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows.len() * width);
            for &r in rows {
                out.extend_from_slice(&src[r * width..(r + 1) * width]);
            }
            out
        };
        let pre = self
            .pre
            .iter()
            .map(|a| gather(a, a.len() / self.p))
            .collect();
        let post = self
            .post
            .iter()
            .map(|z| gather(z, z.len() / self.p))
            .collect();
        (
            BatchTape {
                p: rows.len(),
                activation: self.activation,
                pre,
                post,
            },
            gather(inputs, d),
        )
    }

    /// Reverse pass with output seeds `s_μ`: returns `Gᵢ` per layer.
    pub fn backward(&self, params: &Params, seeds: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(seeds.len(), self.p);
        let nl = params.num_layers();
        let mut g: Vec<Vec<f64>> = vec![Vec::new(); nl];
        g[nl - 1] = seeds.to_vec();
        for i in (1..nl).rev() {
            let layer = params.layer(i);
            let mut gz = self.pull_back(&g[i], layer.weights, layer.fan_in, layer.fan_out);
            let d1 = self.first_derivs(i - 1);
            for (v, s) in gz.iter_mut().zip(&d1) {
                *v *= s;
            }
            g[i - 1] = gz;
        }
        g
    }

    /// `G·W` for a `p × fan_out` signal block.
    fn pull_back(&self, g: &[f64], w: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.p * fan_in];
        gemm(self.p, fan_out, fan_in, 1.0, (g, fan_out, 1), (w, fan_in, 1), 0.0, (&mut out, fan_in, 1));
        out
    }

    /// `Σ_μ s_μ ∇_W f(x_μ)` given the signals from [`BatchTape::backward`].
    pub fn gradient(&self, params: &Params, inputs: &[f64], signals: &[Vec<f64>]) -> Vec<f64> {
        let mut grad = vec![0.0; params.len()];
        for (i, lay) in params.layout().iter().enumerate() {
            let z = self.layer_input(inputs, i);
            accumulate_layer(&mut grad, lay, &signals[i], z, self.p, 0.0);
        }
        grad
    }

    /// `∇_x f(x_μ)` per pattern, `p × d`.
    pub fn input_gradients(&self, params: &Params, signals: &[Vec<f64>]) -> Vec<f64> {
        let layer = params.layer(0);
        self.pull_back(&signals[0], layer.weights, layer.fan_in, layer.fan_out)
    }

    /// Rows `s_μ ∇_W f(x_μ)`, one per pattern.
    pub fn per_sample_gradients(&self, params: &Params, inputs: &[f64], signals: &[Vec<f64>]) -> Matrix {
        let n = params.len();
        let mut out = Matrix::zeros(self.p, n);
        for (i, lay) in params.layout().iter().enumerate() {
            let z = self.layer_input(inputs, i);
            for mu in 0..self.p {
                let row = out.row_mut(mu);
                let g = &signals[i][mu * lay.fan_out..(mu + 1) * lay.fan_out];
                let zr = &z[mu * lay.fan_in..(mu + 1) * lay.fan_in];
                outer_into(&mut row[lay.weights..lay.bias], g, zr);
                for (b, gv) in row[lay.bias..lay.end()].iter_mut().zip(g) {
                    *b = -gv;
                }
            }
        }
        out
    }

    /// Tangent of the forward pass along `dparams` (flat, length `N`) and
    /// `dinputs` (`p × d`). Either may be omitted (zero).
    pub fn r_forward(&self, params: &Params, inputs: &[f64], dparams: Option<&[f64]>, dinputs: Option<&[f64]>) -> RTape {
        let nl = params.num_layers();
        let mut ra: Vec<Option<Vec<f64>>> = Vec::with_capacity(nl);
        let mut rz: Vec<Option<Vec<f64>>> = Vec::with_capacity(nl - 1);
        for (i, lay) in params.layout().iter().enumerate() {
            let layer = params.layer(i);
            let z = self.layer_input(inputs, i);
            let rz_prev: Option<&[f64]> = if i == 0 { dinputs } else { rz[i - 1].as_deref() };
            let dblock = dparams.map(|dp| (&dp[lay.weights..lay.bias], &dp[lay.bias..lay.end()]));
            let dblock = dblock.filter(|(w, b)| w.iter().chain(b.iter()).any(|&v| v != 0.0));

            let mut out: Option<Vec<f64>> = None;
            if let Some(rzp) = rz_prev {
                let mut a = vec![0.0; self.p * lay.fan_out];
                gemm(self.p, lay.fan_in, lay.fan_out, 1.0, (rzp, lay.fan_in, 1), (layer.weights, 1, lay.fan_in), 0.0, (&mut a, lay.fan_out, 1));
                out = Some(a);
            }
            if let Some((dw, db)) = dblock {
                let a = out.get_or_insert_with(|| vec![0.0; self.p * lay.fan_out]);
                gemm(self.p, lay.fan_in, lay.fan_out, 1.0, (z, lay.fan_in, 1), (dw, 1, lay.fan_in), 1.0, (a, lay.fan_out, 1));
                for row in a.chunks_exact_mut(lay.fan_out) {
                    for (v, b) in row.iter_mut().zip(db) {
                        *v -= b;
                    }
                }
            }
            if i + 1 < nl {
                let next = out.as_ref().map(|a| {
                    let d1 = self.first_derivs(i);
                    a.iter().zip(&d1).map(|(x, s)| x * s).collect()
                });
                rz.push(next);
            }
            ra.push(out);
        }
        RTape { ra, rz }
    }

    /// Tangent of the reverse pass (output seeds held fixed): `R Gᵢ` per
    /// layer, `None` where it vanishes.
    pub fn r_backward(&self, params: &Params, signals: &[Vec<f64>], rtape: &RTape, dparams: Option<&[f64]>) -> Vec<Option<Vec<f64>>> {
        let nl = params.num_layers();
        let mut rg: Vec<Option<Vec<f64>>> = vec![None; nl];
        for i in (1..nl).rev() {
            let lay = params.layout()[i];
            let layer = params.layer(i);
            let mut rgz: Option<Vec<f64>> = rg[i]
                .as_ref()
                .map(|r| self.pull_back(r, layer.weights, lay.fan_in, lay.fan_out));
            if let Some(dp) = dparams {
                let dw = &dp[lay.weights..lay.bias];
                if dw.iter().any(|&v| v != 0.0) {
                    let t = self.pull_back(&signals[i], dw, lay.fan_in, lay.fan_out);
                    match rgz.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&t).for_each(|(a, b)| *a += b),
                        None => rgz = Some(t),
                    }
                }
            }
            let d1 = self.first_derivs(i - 1);
            let mut out = rgz.map(|mut v| {
                v.iter_mut().zip(&d1).for_each(|(a, s)| *a *= s);
                v
            });
            if let (Some(d2), Some(ra)) = (self.second_derivs(i - 1), rtape.ra[i - 1].as_ref()) {
                let gz = self.pull_back(&signals[i], layer.weights, lay.fan_in, lay.fan_out);
                let acc = out.get_or_insert_with(|| vec![0.0; self.p * lay.fan_in]);
                for k in 0..acc.len() {
                    acc[k] += d2[k] * ra[k] * gz[k];
                }
            }
            rg[i - 1] = out;
        }
        rg
    }

    /// `Σ_μ s_μ (∇∇f)(x_μ)·(dW, dx)` restricted to the parameter block.
    pub fn r_gradient(&self, params: &Params, inputs: &[f64], signals: &[Vec<f64>], rtape: &RTape, rsignals: &[Option<Vec<f64>>]) -> Vec<f64> {
        let mut out = vec![0.0; params.len()];
        for (i, lay) in params.layout().iter().enumerate() {
            let z = self.layer_input(inputs, i);
            if let Some(rg) = rsignals[i].as_ref() {
                accumulate_layer(&mut out, lay, rg, z, self.p, 1.0);
            }
            let rz_prev = if i == 0 { None } else { rtape.rz[i - 1].as_deref() };
            if let Some(rz) = rz_prev {
                // G_iᵀ R z_{i-1}; no bias contribution.
                gemm(lay.fan_out, self.p, lay.fan_in, 1.0, (&signals[i], 1, lay.fan_out), (rz, lay.fan_in, 1), 1.0, (&mut out[lay.weights..lay.bias], lay.fan_in, 1));
            }
        }
        out
    }

    /// Per-pattern rows of the R-gradient, with `dinputs` supplying the
    /// tangent of the first layer's input.
    pub fn r_per_sample_gradients(&self, params: &Params, inputs: &[f64], dinputs: Option<&[f64]>, signals: &[Vec<f64>], rtape: &RTape, rsignals: &[Option<Vec<f64>>]) -> Matrix {
        let mut out = Matrix::zeros(self.p, params.len());
        for (i, lay) in params.layout().iter().enumerate() {
            let z = self.layer_input(inputs, i);
            let rz_prev = if i == 0 { dinputs } else { rtape.rz[i - 1].as_deref() };
            for mu in 0..self.p {
                let row = out.row_mut(mu);
                let wblock = &mut row[lay.weights..lay.bias];
                let zr = &z[mu * lay.fan_in..(mu + 1) * lay.fan_in];
                if let Some(rg) = rsignals[i].as_ref() {
                    let rgr = &rg[mu * lay.fan_out..(mu + 1) * lay.fan_out];
                    outer_add(wblock, rgr, zr);
                    for (b, v) in row[lay.bias..lay.end()].iter_mut().zip(rgr) {
                        *b = -v;
                    }
                }
                if let Some(rz) = rz_prev {
                    let g = &signals[i][mu * lay.fan_out..(mu + 1) * lay.fan_out];
                    let rzr = &rz[mu * lay.fan_in..(mu + 1) * lay.fan_in];
                    outer_add(&mut row[lay.weights..lay.bias], g, rzr);
                }
            }
        }
        out
    }
}

/// Adds `Gᵀ Z` into the weight block and `-Σ G` into the bias block.
fn accumulate_layer(out: &mut [f64], lay: &super::LayerLayout, g: &[f64], z: &[f64], p: usize, beta: f64) {
    gemm(lay.fan_out, p, lay.fan_in, 1.0, (g, 1, lay.fan_out), (z, lay.fan_in, 1), beta, (&mut out[lay.weights..lay.bias], lay.fan_in, 1));
    let bias = &mut out[lay.bias..lay.end()];
    if beta == 0.0 {
        bias.fill(0.0);
    }
    for row in g.chunks_exact(lay.fan_out) {
        for (b, v) in bias.iter_mut().zip(row) {
            *b -= v;
        }
    }
}

#[inline]
fn outer_into(dst: &mut [f64], u: &[f64], v: &[f64]) {
    for (r, &ur) in u.iter().enumerate() {
        for (d, &vc) in dst[r * v.len()..(r + 1) * v.len()].iter_mut().zip(v) {
            *d = ur * vc;
        }
    }
}

#[inline]
fn outer_add(dst: &mut [f64], u: &[f64], v: &[f64]) {
    for (r, &ur) in u.iter().enumerate() {
        if ur == 0.0 {
            continue;
        }
        for (d, &vc) in dst[r * v.len()..(r + 1) * v.len()].iter_mut().zip(v) {
            *d += ur * vc;
        }
    }
}
