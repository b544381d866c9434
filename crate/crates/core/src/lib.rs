//! Physics-aware conditioning core for video-to-audio generation.
//!
//! - [`trace`]: file-based scene model (masks, point maps, annotations).
//! - [`velocity`]: metric centroid tracks and speeds.
//! - [`adapter`]: physics adapter (Fourier features, FiLM, gated pooling,
//!   delta-modulation of AdaLN parameters).
//! - [`cfm`]: toy conditional flow-matching trainer and sampler.
//! - [`apcc`]: audio–physics correlation metric.
//! - [`report`]: JSON/CSV emission.

pub mod adapter;
pub mod apcc;
pub mod cfm;
pub mod check;
pub mod cli;

pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod params;
pub mod report;

pub mod synth;
pub mod tape;
pub mod trace;
pub mod velocity;

pub use error::{Error, Result};
