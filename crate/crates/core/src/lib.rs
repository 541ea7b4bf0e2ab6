//! Content-adaptive resolution and bit-depth pre/post-processing around a
//! host video codec.

pub mod adapt;
pub mod cli;
pub mod codec;
pub mod container;
mod error;
pub mod frames;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod qmo;
pub mod restore;
pub mod synth;

pub use error::{Error, Result};
