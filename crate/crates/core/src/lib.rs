//! Stochastic degradation processes and incremental-reconstruction reverse
//! sampling for linear inverse problems, with an exact Gaussian oracle for
//! verifying the sampler's data-consistency and error-bound guarantees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod degrade;
pub mod denoise;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prior;
pub mod random;
pub mod sampler;
pub mod schedule;
pub mod sdp;
pub mod signal;
pub mod verify;

pub use error::{Error, Result};
pub use signal::{Shape, Signal};
