// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod configuration;
pub mod continuation;
pub mod equilibria;
pub mod error;
pub mod exec;
pub mod potential;
pub mod ring_sum;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use exec::Execution;
