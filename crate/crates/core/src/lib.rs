#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod filter;
mod kernel;
pub mod model;
pub mod noise;
pub mod quantum;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
