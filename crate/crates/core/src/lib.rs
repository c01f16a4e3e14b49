//! Signal-processing building blocks for spherical-harmonic-domain
//! multichannel speech enhancement.
//!
//! The crate covers the front half of the pipeline: microphone array
//! geometry and steering vectors, spherical harmonics and the discrete
//! spherical harmonics transform (SHT), image-method room simulation,
//! STFT analysis/synthesis, SHT feature extraction per time-frequency bin,
//! objective metrics (STOI, SI-SDR) and the on-disk formats (WAV, tensor
//! files) shared by the other crates.

pub mod acoustics;
pub mod array;
mod error;
pub mod features;
pub mod metrics;
pub mod signal;
pub mod spectral;
pub mod spherical;
pub mod tensorfile;
pub mod wav;

pub use error::{Error, Result};
pub use num_complex::{Complex32, Complex64};

/// Speed of sound used when nothing else is configured, in m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 343.0;
