// `!(a >= b)` is used on purpose so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actions;
pub mod calibration;
pub mod codec;
pub mod config;
pub mod cursor;
pub mod engine;
pub mod expression;
pub mod model;
pub mod wheel;
pub mod live;
pub mod replay;
pub mod sink;
