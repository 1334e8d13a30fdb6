// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
#[cfg(feature = "simulation")]
pub mod ensembles;
pub mod error;
pub mod fitting;
pub mod fredholm;
pub mod kernels;
pub mod linalg;
pub mod numdiff;
mod parallel;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod surmise;

pub use error::{Error, Result};
