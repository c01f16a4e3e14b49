//! Spherical-harmonic-aided speech enhancer: parallel STFT and SHT
//! encoders built from in-place gated convolutions, a channel-wise LSTM and
//! a transposed-GLU decoder that maps to the complex reference-channel STFT.
//!
//! Backward passes are written out by hand for every layer; the network is
//! generic over `f32` (training) and `f64` (gradient checks).

pub mod act;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod scalar;
pub mod summary;
pub mod train;

use shse_core::features::Variant;

pub use model::{Direction, Enhancer, EnhancerConfig};
pub use params::ParameterSet;
pub use summary::{count_params_flops, ModelSummary};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] shse_core::Error),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid enhancer configuration: {0}")]
    InvalidConfig(String),
    #[error("{model} model given {input} input")]
    VariantMismatch { model: Variant, input: Variant },
    #[error("estimate and target do not overlap in the reconstructable region")]
    EmptyOverlap,
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
