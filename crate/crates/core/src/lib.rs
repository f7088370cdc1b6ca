// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod effective_noise;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod format;
pub mod network;
pub mod plots;
pub mod regularizers;
pub mod reparam;
pub mod rng;

pub use error::{Error, Result};
