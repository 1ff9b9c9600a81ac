//! Shared oracles: a loop-based reference network and finite differences.
#![allow(dead_code)]

use jamlab_core::data::{random_sphere, Dataset};
use jamlab_core::net::{Activation, NetworkConfig, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rho(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::Linear => z,
    }
}

/// Straight transcription of the recursion with nested loops.
pub fn naive_forward(p: &Params, x: &[f64]) -> f64 {
    let c = p.config();
    let flat = p.flat();
    let mut off = 0;
    let mut z: Vec<f64> = x.to_vec();
    for i in 0..=c.depth {
        let fan_in = z.len();
        let fan_out = if i == c.depth { 1 } else { c.h };
        let w = &flat[off..off + fan_in * fan_out];
        let b = &flat[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        off += fan_in * fan_out + fan_out;
        let mut a = vec![0.0; fan_out];
        for r in 0..fan_out {
            let mut s = 0.0;
            for k in 0..fan_in {
                s += w[r * fan_in + k] * z[k];
            }
            a[r] = s - b[r];
        }
        if i == c.depth {
            return a[0];
        }
        z = a.iter().map(|&v| rho(c.activation, v)).collect();
    }
    unreachable!()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_params(config: NetworkConfig, scale: f64, seed: u64) -> Params {
    let mut r = rng(seed);
    let fans: Vec<f64> = jamlab_core::net::layout(&config)
        .iter()
        .flat_map(|l| std::iter::repeat((l.fan_in as f64).sqrt()).take(l.fan_in * l.fan_out + l.fan_out))
        .collect();
    let flat = fans
        .iter()
        .map(|f| scale * (r.random::<f64>() * 2.0 - 1.0) * 1.7 / f)
        .collect();
    Params::from_flat(config, flat).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn perturbed(p: &Params, i: usize, h: f64) -> Params {
    let mut q = p.clone();
    q.flat_mut()[i] += h;
    q
}

/// Central differences of a scalar function of the parameters.
pub fn fd_gradient(p: &Params, step: f64, f: impl Fn(&Params) -> f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| (f(&perturbed(p, i, step)) - f(&perturbed(p, i, -step))) / (2.0 * step))
        .collect()
}

/// Central differences of a vector function: column `i` is `∂v/∂W_i`,
/// returned as rows (`out[i]`).
pub fn fd_jacobian(p: &Params, step: f64, f: impl Fn(&Params) -> Vec<f64>) -> Vec<Vec<f64>> {
    (0..p.len())
        .map(|i| {
            let a = f(&perturbed(p, i, step));
            let b = f(&perturbed(p, i, -step));
            a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * step)).collect()
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

pub fn sphere(p: usize, d: usize, seed: u64) -> Dataset {
    random_sphere(p, d, seed).unwrap()
}
