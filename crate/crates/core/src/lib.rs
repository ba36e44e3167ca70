// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod calibration;
pub mod scenario;
mod serde_util;
pub mod sensor;
pub mod decision;
pub mod eval;
pub mod config;
pub mod service;
