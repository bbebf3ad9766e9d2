//! Continuous-state branching processes with multiplicative catastrophes.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
pub mod mechanisms;
pub mod quenched_stable;
pub mod quenched_ode;
pub mod regimes;
pub mod montecarlo;
pub mod cellmodel;
pub mod config;
pub mod cli;
