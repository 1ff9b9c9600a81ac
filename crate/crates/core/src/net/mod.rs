//! Fully-connected networks `d → h → … → h → 1` with subtracted biases:
//!
//! ```text
//! a¹ = W¹ x − B¹,   aⁱ = Wⁱ ρ(aⁱ⁻¹) − Bⁱ,   f(x; W) = a^{L+1}
//! ```
//!
//! Weight matrices are stored `fan_out × fan_in`, row-major. The flat
//! parameter vector is layer-major with each layer's weights followed by its
//! biases; every derivative routine indexes parameters in that order.

mod init;
mod single;
pub(crate) mod tape;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use init::{init_orthogonal, init_uniform, Init};
pub use single::{forward, grad_input, grad_params, hessian_of_f, hessian_vector_product, mixed_input_derivatives, ForwardRecord};
pub use tape::{BatchTape, RTape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(z),
            Activation::Linear => z,
        }
    }

    /// First derivative; the ReLU step is taken as `θ(0) = 0`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(z);
                1.0 - t * t
            }
            Activation::Linear => 1.0,
        }
    }

    /// Second derivative, almost everywhere (zero for ReLU).
    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = libm::tanh(z);
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Relu | Activation::Linear => 0.0,
        }
    }
}

/// Architecture of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Input dimension.
    pub d: usize,
    /// Hidden width.
    pub h: usize,
    /// Number of hidden layers.
    #[serde(rename = "L")]
    pub depth: usize,
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn new(d: usize, h: usize, depth: usize, activation: Activation) -> Result<Self> {
        let c = Self { d, h, depth, activation };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.h == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig(
                "d, h and L must all be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    pub fn with_width(self, h: usize) -> Self {
        Self { h, ..self }
    }

    /// Number of parameters `N` (weights and biases, output bias included).
    pub fn count_params(&self) -> usize {
        count_params(self)
    }

    /// Number of hidden neurons `L·h`.
    pub fn hidden_neurons(&self) -> usize {
        self.depth * self.h
    }

    /// Number of layers carrying parameters (`L + 1`).
    pub fn num_layers(&self) -> usize {
        self.depth + 1
    }

    /// `(fan_in, fan_out)` of layer `i` (0-based, the output layer is `L`).
    pub fn layer_shape(&self, i: usize) -> (usize, usize) {
        assert!(i <= self.depth);
        let fan_in = if i == 0 { self.d } else { self.h };
        let fan_out = if i == self.depth { 1 } else { self.h };
        (fan_in, fan_out)
    }
}

pub fn count_params(config: &NetworkConfig) -> usize {
    let (d, h, l) = (config.d, config.h, config.depth);
    (d * h + h) + (l - 1) * (h * h + h) + (h + 1)
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerLayout {
    pub fn end(&self) -> usize {
        self.bias + self.fan_out
    }
}

pub fn layout(config: &NetworkConfig) -> Vec<LayerLayout> {
    let mut off = 0;
    (0..config.num_layers())
        .map(|i| {
            let (fan_in, fan_out) = config.layer_shape(i);
            let l = LayerLayout {
                fan_in,
                fan_out,
                weights: off,
                bias: off + fan_in * fan_out,
            };
            off = l.end();
            l
        })
        .collect()
}

/// Parameters of a network; serialized as `{config, flat_params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct Params {
    config: NetworkConfig,
    flat: Vec<f64>,
    layout: Vec<LayerLayout>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    config: NetworkConfig,
    flat_params: Vec<f64>,
}

impl TryFrom<ParamsRepr> for Params {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        Params::from_flat(r.config, r.flat_params)
    }
}

impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        ParamsRepr {
            config: p.config,
            flat_params: p.flat,
        }
    }
}

/// Borrowed view of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_out × fan_in`, row-major.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

#[derive(Debug)]
pub struct LayerViewMut<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: &'a mut [f64],
    pub bias: &'a mut [f64],
}

impl Params {
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            flat: vec![0.0; config.count_params()],
            layout: layout(&config),
            config,
        })
    }

    pub fn from_flat(config: NetworkConfig, flat: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let n = config.count_params();
        if flat.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: flat.len(),
            });
        }
        Ok(Self {
            layout: layout(&config),
            config,
            flat,
        })
    }

    #[inline]
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.flat.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    #[inline]
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    #[inline]
    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    pub fn layer(&self, i: usize) -> LayerView<'_> {
        let l = self.layout[i];
        LayerView {
            fan_in: l.fan_in,
            fan_out: l.fan_out,
            weights: &self.flat[l.weights..l.bias],
            bias: &self.flat[l.bias..l.end()],
        }
    }

    pub fn layer_mut(&mut self, i: usize) -> LayerViewMut<'_> {
        let l = self.layout[i];
        let (weights, bias) = self.flat[l.weights..l.end()].split_at_mut(l.bias - l.weights);
        LayerViewMut {
            fan_in: l.fan_in,
            fan_out: l.fan_out,
            weights,
            bias,
        }
    }

    /// Per-layer `(weights, biases)` copies; inverse of [`Params::from_layers`].
    pub fn to_layers(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.num_layers())
            .map(|i| {
                let l = self.layer(i);
                (l.weights.to_vec(), l.bias.to_vec())
            })
            .collect()
    }

    pub fn from_layers(config: NetworkConfig, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if layers.len() != p.num_layers() {
            return Err(Error::DimensionMismatch {
                expected: p.num_layers(),
                actual: layers.len(),
            });
        }
        for (i, (w, b)) in layers.iter().enumerate() {
            let l = p.layer_mut(i);
            if w.len() != l.weights.len() || b.len() != l.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.weights.len() + l.bias.len(),
                    actual: w.len() + b.len(),
                });
            }
            l.weights.copy_from_slice(w);
            l.bias.copy_from_slice(b);
        }
        Ok(p)
    }

    /// ReLU rescaling symmetry: hidden layer `i` (0-based, `i < L`) gets its
    /// weights and biases multiplied by `lambda`, layer `i + 1` its weights
    /// divided by `lambda`.
    pub fn rescale_layer(&mut self, i: usize, lambda: f64) {
        assert!(i + 1 < self.num_layers(), "only hidden layers can be rescaled");
        let l = self.layer_mut(i);
        l.weights.iter_mut().for_each(|w| *w *= lambda);
        l.bias.iter_mut().for_each(|b| *b *= lambda);
        let next = self.layer_mut(i + 1);
        next.weights.iter_mut().for_each(|w| *w /= lambda);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_from_shape_chain() {
        let c = NetworkConfig::new(10, 30, 5, Activation::Relu).unwrap();
        assert_eq!(c.count_params(), 4081);
        let c = NetworkConfig::new(1, 1, 1, Activation::Relu).unwrap();
        assert_eq!(c.count_params(), 4);
        let c = NetworkConfig::new(51, 51, 3, Activation::Relu).unwrap();
        // 2652 + 2·2652 + 52.
        assert_eq!(c.count_params(), 8008);
        assert_eq!(c.count_params() - c.hidden_neurons(), 7855);
        // Dropping the output bias as well gives 7854.
        assert_eq!(c.count_params() - c.hidden_neurons() - 1, 7854);
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(NetworkConfig::new(0, 3, 1, Activation::Tanh).is_err());
        assert!(NetworkConfig::new(3, 0, 1, Activation::Tanh).is_err());
        assert!(NetworkConfig::new(3, 3, 0, Activation::Tanh).is_err());
    }

    #[test]
    fn layout_tiles_flat_vector() {
        let c = NetworkConfig::new(3, 4, 2, Activation::Tanh).unwrap();
        let lay = layout(&c);
        assert_eq!(lay[0].weights, 0);
        for w in lay.windows(2) {
            assert_eq!(w[0].end(), w[1].weights);
        }
        assert_eq!(lay.last().unwrap().end(), c.count_params());
    }

    #[test]
    fn structured_view_round_trip() {
        let c = NetworkConfig::new(2, 3, 2, Activation::Relu).unwrap();
        let flat: Vec<f64> = (0..c.count_params()).map(|i| i as f64).collect();
        let p = Params::from_flat(c, flat.clone()).unwrap();
        let q = Params::from_layers(c, &p.to_layers()).unwrap();
        assert_eq!(q.flat(), &flat[..]);
        assert_eq!(p.layer(0).weights.len(), 6);
        assert_eq!(p.layer(2).bias, &[flat[flat.len() - 1]]);
    }

    #[test]
    fn json_shape() {
        let c = NetworkConfig::new(1, 1, 1, Activation::Relu).unwrap();
        let p = Params::from_flat(c, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"config":{"d":1,"h":1,"L":1,"activation":"relu"},"flat_params":[1.0,0.0,1.0,0.0]}"#
        );
        let back: Params = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"config":{"d":1,"h":1,"L":1,"activation":"relu"},"flat_params":[1.0]}"#;
        assert!(serde_json::from_str::<Params>(bad).is_err());
    }
}
