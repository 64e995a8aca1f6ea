//! Learning directed, weighted multilayer networks from panel time series.
//!
//! The pipeline fractionally differences each series until it is stationary,
//! fits a Tucker-structured tensor autoregression whose coefficient tensor
//! `B[i, j, k, l]` links entity `i` in layer `j` to entity `k` in layer `l`
//! one step ahead, then sparsifies every layer-pair block with a Pólya-urn
//! significance filter and computes multilayer diagnostics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod fracdiff;
mod linalg;
pub mod multinet;
pub mod netfilter;
pub mod panel;
pub mod pipeline;
pub mod regression;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
