//! Numerical core for studying the jamming transition of fully-connected
//! networks trained with the quadratic hinge loss.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. It covers
//!
//! - [`net`]: the network recursion, exact first and second derivatives,
//!   and the two initialization schemes;
//! - [`objective`]: margins, losses, constraint counting and the training
//!   loop with trajectory recording;
//! - [`data`]: random-sphere datasets, IDX decoding, PCA and parity labels;
//! - [`landscape`]: the Hessian split `H = H0 + Hp`, spectra, cusp counts,
//!   the effective number of parameters and the stability inequalities;
//! - [`linalg`]: the dense kernels everything above is built on.
//!
//! File formats, sweeps and the command line live in the `jamlab` crate.
//!
//! Enable the `std` feature for runtime SIMD detection in the GEMM kernels.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod data;
mod error;
pub mod landscape;
pub mod linalg;
pub mod net;
pub mod objective;
pub mod rng;

pub use error::{Error, Result};
