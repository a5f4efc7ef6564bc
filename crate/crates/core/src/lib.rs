pub mod edf;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
pub mod dsp;
pub mod features;
pub mod nn;
pub mod analysis;
pub mod harness;
pub mod synth;
