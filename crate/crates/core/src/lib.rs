//! Decentralized graph clustering with the discrete wave equation and local
//! dynamic mode decomposition.

pub mod error;
pub mod graph;
pub mod laplacian;
pub mod linalg;
pub mod dmd;
pub mod fft;
pub mod kmeans;
pub mod clustering;
pub mod spectral;
pub mod harness;
pub mod wave;

pub use error::{Error, Result};
