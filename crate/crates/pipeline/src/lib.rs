//! Dataset generation, training and evaluation drivers behind the `shse`
//! command-line tool.
//!
//! Every stage reads and writes plain files: WAV audio, `SHTF` tensor files,
//! `SHCK` checkpoints and line-delimited JSON manifests. Each stage is a
//! pure function of its inputs and the experiment seed.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod features;
pub mod io;
pub mod mix;
pub mod rir;
pub mod seeds;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] shse_core::Error),
    #[error(transparent)]
    Model(#[from] shse_enhancer::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("evaluation grid has no utterances for cells {0:?}")]
    MissingCells(Vec<(f64, f64)>),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn manifest(path: &Path, reason: impl Into<String>) -> Self {
        Error::Manifest {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
