//! Fair ranking of systems evaluated on sparse, difficulty-heterogeneous
//! benchmark matrices: a 2PL IRT estimator, the simple-average baseline it is
//! compared against, and the simulation experiments that map where averaging
//! breaks down.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod irt;
pub mod matrix;
pub mod ranking;
pub mod simgen;

pub use error::{Error, Result};
