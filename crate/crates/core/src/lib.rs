#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cluster;
pub mod convnet;
pub mod energy;
pub mod error;
pub mod link;
pub mod opu;
pub mod photonics;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
