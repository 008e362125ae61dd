#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Statistical-query oracle laboratory for sparse detection problems.
//!
//! The crate covers the oracle protocol and its tolerance accounting, the
//! shifted-mean and spiked-covariance models over sparse-set and
//! perfect-matching classes, explicit query-based tests, exact
//! likelihood-ratio tests via matrix permanents, oracle-complexity and
//! information-theoretic lower bounds, and a seeded Monte Carlo harness.

pub mod bounds;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod structure_classes;
pub mod svg;

pub use error::{Error, Result};
