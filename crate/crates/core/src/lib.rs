//! Simulator for a modular inspection and maintenance robot in an orbital warehouse.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod geometry;
pub mod inspection;
pub mod interconnect;
pub mod locomotion;
pub mod maintenance;
pub mod scene;
pub mod sensors;
pub mod verification;
