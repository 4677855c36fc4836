//! Learning from label proportions (LLP) for ERP brain-computer interfaces.
//!
//! Class-mean ERP responses are reconstructed from the means of stimulus
//! groups with known target proportions, so a linear decoder can be trained
//! online without any label information.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod mixing;
pub mod sequence;
pub mod signal;
pub mod simgen;
pub mod types;

pub use error::{LlpError, Result};
pub use types::{FeatureVector, Label};
