//! Core of a small laboratory for studying when an auxiliary classification
//! loss improves a regression model trained on imbalanced targets.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! pieces:
//!
//! - [`synth`]: random two-sine ground-truth functions on `[-1, 1]`.
//! - [`sampling`]: train/validation/test splits for the clean, noisy and
//!   out-of-distribution scenarios under uniform or peaked target sampling.
//! - [`binning`]: uniform target bins, histogram equalization of classes and
//!   per-class keep probabilities.
//! - [`model`]: a fixed 1-6-16-1 ReLU MLP with an optional training-time
//!   classification head, hand-written backprop and AdamW.
//! - [`losses`]: MSE, softmax cross-entropy, the combined objective and the
//!   discrete imbalance-gap diagnostic.
//! - [`train`]: the training loop tying the pieces together.
//!
//! IO, configuration, the experiment grid and the CLI live in the companion
//! `regcls` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod binning;
pub mod error;
pub mod losses;
mod math;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
