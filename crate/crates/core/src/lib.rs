//! Regression learners that anticipate a shared test-time attacker.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod baselines;
pub mod cli;
pub mod data;
pub mod equilibrium;
pub mod error;
pub mod eval;
pub mod game;
pub mod linalg;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Matrix;
