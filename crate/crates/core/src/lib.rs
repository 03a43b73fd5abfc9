//! Exact diagonalization and high-harmonic spectra of driven SSH-Hubbard chains.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basis;
pub mod checkpoint;
pub mod config;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fullspace;
pub mod linalg;
pub mod operators;
pub mod pipeline;
pub mod spectrum;

pub use error::{Error, Result};
