// Comparisons written as `!(x > 0.0)` are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod attack;
pub mod defenses;
pub mod error;
pub mod eval;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
