//! Pseudospectral simulation of the cubic multiplicative stochastic wave
//! equation with spatial white noise on the two- and three-dimensional torus.

// Validation is written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod localization;
pub mod noise;
pub mod propagation;
pub mod spectral;

pub use error::{Error, Result};
