//! Automatic design of quantum feature maps for fidelity kernels.
//!
//! The crate covers the whole search loop on top of an exact simulator:
//! feature selection ([`data`]), layout search spaces and image encodings
//! ([`circuit`]), kernel assembly and alignment ([`kernel`]), a small MLP
//! performance predictor ([`predictor`]) and the staged search with
//! fine-tuning and baselines ([`pipeline`]).

// `!(x > 0.0)` is used on purpose: it rejects NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod data;
pub mod error;
pub mod kernel;
pub mod pipeline;
pub mod predictor;
pub mod qsim;

pub use error::{Error, Result};
