//! One-shot image restoration with a patch-scanning recurrent network.
//!
//! A ReLU recurrent encoder with a linear decoder is trained on a single
//! degraded/clean image pair and then applied to unseen images, for Gaussian
//! deblurring and x3 super-resolution. The [`sparse`] module holds the
//! ISTA machinery that the recurrence mirrors.

pub mod degrade;
pub mod error;
pub mod harness;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod patching;
pub mod resample;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use rng::Rng;
