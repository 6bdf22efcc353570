//! Brownian motion of Ginibre matrices and the Burgers-type flow of their
//! averaged characteristic determinant.
//!
//! * [`dynamics`]: sampling and evolving matrices.
//! * [`spectral`] and [`estimators`]: per-sample eigen data, overlaps,
//!   resolvents, determinants, and their ensemble averages.
//! * [`flow`]: the large-N solution by characteristics.
//! * [`finite_n`]: the exact finite-N determinant, density and edge profile.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod finite_n;
pub mod flow;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;
