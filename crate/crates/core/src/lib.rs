//! Simulation and control planning for a varactor-tuned reconfigurable
//! intelligent surface.
//!
//! The pipeline runs, in order:
//!
//! - [`circuit`]: unit-cell reflection coefficient versus frequency and bias
//! - [`synthesis`]: per-element phases that steer a feed's field to a direction
//! - [`mapping`]: phase to bias inversion and 0.01 V / 16-bit quantization
//! - [`controller`]: frame protocol and DAC register-bank emulation
//! - [`radiation`]: scattered pattern and beam metrics
//!
//! [`scenario`] and [`acceptance`] compose these stages for the command line.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Angles cross every public interface in degrees.

pub mod acceptance;
pub mod angle;
pub mod circuit;
pub mod controller;
pub mod error;
pub mod mapping;
pub mod radiation;
pub mod scenario;
pub mod synthesis;

pub use error::{Result, RisError};
