//! Projection-operator dynamics of a small system coupled to a finite bath from correlated
//! initial states: exact propagation, weak-coupling generators and mixing diagnostics.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod liouville;
pub mod mixing;
pub mod model;
pub mod nz;

pub use error::{Error, Result};
