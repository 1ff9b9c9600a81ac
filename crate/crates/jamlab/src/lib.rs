//! File formats, experiment sweeps, run manifests and SVG figures on top of
//! [`jamlab_core`].

pub mod config;
mod error;
pub mod io;
pub mod manifest;
pub mod mnist;
pub mod plot;
pub mod reports;
pub mod runs;
pub mod sweeps;

pub use error::{Error, Result};
pub use jamlab_core as core;
