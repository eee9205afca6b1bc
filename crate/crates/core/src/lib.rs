//! Coherent plane-wave compounding toolkit: delay-and-sum and adaptive
//! beamformers (including fine-grained joint coherence factor weighting),
//! contrast-matched display, and an RF simulator for ground truth.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamformers;
pub mod datapath;
pub mod display;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, ErrorCategory, Result};
