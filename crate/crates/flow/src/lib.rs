//! Experiment harness for Brownian Ginibre dynamics: configuration, the
//! experiments that emit figure data, and the verification suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod verify;

pub use config::{Experiment, ExperimentConfig};
pub use error::{FlowError, Result};
pub use experiments::run;
