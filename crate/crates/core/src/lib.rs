#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bec;
pub mod channel;
pub mod damping;
pub mod dephasing;
pub mod error;
pub mod measures;
pub mod numerics;
pub mod quantum;
pub mod rate;
pub mod runner;

pub use error::{Error, Result};
