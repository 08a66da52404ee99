//! Sparse support estimation at the feature-vector level: class-grouped
//! dictionaries, coarse proxy computation, representation-based
//! classifiers (CRC, SRC, k-NN), compact convolutional support-estimator
//! networks trained from scratch, and a cross-validated evaluation
//! harness with a CLI.
//!
//! The pipeline mirrors the usual flow: standardize features, reduce
//! with PCA, stack training samples into a class-grouped dictionary,
//! map queries to coarse coefficient proxies through a ridge denoiser,
//! and decide classes either from per-class residuals (CRC/SRC) or with
//! a small convolutional network over the 2-D proxy plane.

pub mod dictionary;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod network;
pub mod pipeline;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
