//! Two-stream convolutional classification of walking motions from 20-joint
//! skeleton sequences.

pub mod augment;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod model;
pub mod nn;
pub mod synth;

pub use error::{Error, Result};
