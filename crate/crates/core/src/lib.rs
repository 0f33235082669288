// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod domain;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod higgs;
pub mod lie;
pub mod linalg;
pub mod pipeline;
pub mod solver;

pub use error::{Error, Result};
