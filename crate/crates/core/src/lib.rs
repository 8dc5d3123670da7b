//! SGD with Polyak-type stepsizes on finite-sum convex problems, with
//! checkers for the boundedness and divergence behaviour of the iterates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod problems;
pub mod projections;
pub mod recipes;
pub mod rng;
pub mod stepsize;

pub use error::{Error, Result};
