//! Machine-to-machine spectral calibration for ultrasound RF classification.

pub mod calibrate;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod rf;
pub mod simulate;

pub use error::{Error, Result};
