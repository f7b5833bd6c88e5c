// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Configuration-driven front end for the `chsurf` numerical modules.

pub mod commands;
pub mod config;
