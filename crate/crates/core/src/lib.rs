// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disc;
pub mod error;
pub mod gauss_solver;
pub mod moduli;
pub mod normal_flow;
pub mod sparse;
pub mod surface;
pub mod toda;

pub use error::{Error, Result};
