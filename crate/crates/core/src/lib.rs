//! Probabilistic virtual fixtures on pose manifolds.
//!
//! Fixtures learned from demonstrations emit Gaussian wrench distributions;
//! these are aligned into a common end-effector space, fused as a product of
//! experts and applied to a simulated body.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitration;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod geometry;
pub mod impedance;
pub mod learning;
pub mod linalg;
pub mod prob;
pub mod sim;

pub use error::{Result, VfError};
pub use exec::Execution;
