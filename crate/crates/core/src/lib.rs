//! Volumetric tumour segmentation with a 3-D U-Net trained against a
//! per-voxel critic and a virtual adversarial perturbation penalty.
//!
//! The crate covers the whole workflow: synthetic phantom data and NIfTI /
//! raw volume I/O ([`volume_io`]), intensity normalization and patching
//! ([`preprocess`]), the two networks ([`segnet`], [`critic`]), objectives
//! ([`losses`]), the alternating training loop with checkpoints
//! ([`trainer`]), whole-volume prediction ([`inference`]), evaluation
//! ([`metrics`]) and the `advseg` command line ([`cli`]).

pub mod cli;
pub mod config;
pub mod critic;
pub mod error;
pub mod inference;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod preprocess;
pub mod rng;
pub mod segnet;
pub mod stats;
pub mod trainer;
pub mod volume_io;

pub use advseg_tensor as tensor;
pub use config::RunConfig;
pub use error::{Error, Result};
