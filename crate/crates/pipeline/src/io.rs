//! Manifest and audio helpers shared by the pipeline stages.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use shse_core::signal::MultichannelSignal;
use shse_core::tensorfile::write_atomic;
use shse_core::wav::read_wav_at;

use crate::{Error, Result};

/// Writes one JSON record per line, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::manifest(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `.wav` files directly inside `dir`, sorted by name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_wav = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a mono WAV at `sample_rate`.
pub fn read_mono(path: &Path, sample_rate: u32) -> Result<Vec<f64>> {
    let sig = read_wav_at(path, sample_rate)?;
    if sig.num_channels() != 1 {
        return Err(Error::manifest(
            path,
            format!("expected mono audio, found {} channels", sig.num_channels()),
        ));
    }
    Ok(sig.into_channels().remove(0))
}

pub fn read_multichannel(path: &Path, sample_rate: u32, channels: usize) -> Result<MultichannelSignal> {
    let sig = read_wav_at(path, sample_rate)?;
    if sig.num_channels() != channels {
        return Err(Error::manifest(
            path,
            format!("expected {channels} channels, found {}", sig.num_channels()),
        ));
    }
    Ok(sig)
}
