//! Data-driven discovery of Lie point symmetries from scattered samples of
//! solutions.

// `!(x >= limit)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod invariance;
pub mod jetspace;
mod linalg;
pub mod neighbors;
pub mod pointcloud;
pub mod prolong;
pub mod tangent;

pub use error::{Error, Result};
