//! Simulation and processing toolkit for TDM-MIMO FMCW inverse synthetic
//! aperture radar.
//!
//! Point-scatterer targets on rigid trajectories are turned into dechirped
//! data cubes ([`synth`]), each channel is motion compensated ([`mocomp`]) and
//! imaged in range-Doppler ([`imaging`]), channel images are integrated
//! non-coherently, and image quality is scored against target-free frames
//! ([`metrics`]). [`pipeline`] ties the stages together and writes artifacts.

mod error;
mod fft;

pub mod config;
pub mod cubefile;
pub mod export;
pub mod imaging;
pub mod metrics;
pub mod mocomp;
pub mod params;
pub mod pipeline;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
