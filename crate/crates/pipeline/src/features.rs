//! Per-utterance STFT and SHT feature tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use shse_core::features::{extract_sht_features, RealTensor};
use shse_core::signal::MultichannelSignal;
use shse_core::spectral::{Spectrogram, StftProcessor};
use shse_core::tensorfile::TensorFile;
use shse_core::features::{ModelInput, Variant};

use crate::config::ExperimentConfig;
use crate::io::{create_dir, read_jsonl, read_multichannel, write_jsonl};
use crate::mix::{self, PairRecord};
use crate::{Error, Result};

pub const MANIFEST: &str = "features.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub order: u32,
    pub frames: usize,
    pub bins: usize,
    pub stft: String,
    pub sht: String,
}

/// Mixture STFT and its SHT features as real tensors `[T][F][2M]` and
/// `[T][F][2(N+1)²]`.
pub struct UtteranceFeatures {
    pub spectrogram: Spectrogram,
    pub stft: RealTensor,
    pub sht: RealTensor,
}

pub fn utterance_features(config: &ExperimentConfig, mixture: &MultichannelSignal) -> Result<UtteranceFeatures> {
    let processor = StftProcessor::new(config.stft())?;
    let spectrogram = processor.stft(mixture)?;
    let sht = extract_sht_features(&spectrogram, &config.geometry()?, config.features.order)?;
    Ok(UtteranceFeatures {
        stft: RealTensor::from_complex(&spectrogram),
        sht: RealTensor::from_complex(sht.as_spectrogram()),
        spectrogram,
    })
}

/// Network input in the layout `variant` expects.
pub fn model_input(stft: RealTensor, sht: RealTensor, variant: Variant) -> Result<ModelInput> {
    Ok(match variant {
        Variant::Parallel => {
            if stft.frames != sht.frames || stft.bins != sht.bins {
                return Err(Error::Core(shse_core::Error::DimensionMismatch {
                    what: "STFT vs SHT frames x bins",
                    expected: stft.frames * stft.bins,
                    found: sht.frames * sht.bins,
                }));
            }
            ModelInput::Parallel { stft, sht }
        }
        Variant::Serial => ModelInput::Serial(stft.concat_channels(&sht)?),
    })
}

/// Frames `start..start + len` of `t`.
pub fn slice_frames(t: &RealTensor, start: usize, len: usize) -> RealTensor {
    let row = t.bins * t.channels;
    RealTensor {
        frames: len,
        bins: t.bins,
        channels: t.channels,
        data: t.data[start * row..(start + len) * row].to_vec(),
    }
}

/// Writes `<id>.stft.shtf` and `<id>.sht.shtf` (32-bit float) for every pair
/// of the dataset, plus `features.jsonl`.
pub fn cmd_features(config: &ExperimentConfig, dataset_dir: &Path, out_dir: &Path) -> Result<Vec<FeatureRecord>> {
    config.validate()?;
    let pairs: Vec<PairRecord> = read_jsonl(&dataset_dir.join(mix::MANIFEST))?;
    create_dir(out_dir)?;
    let mut records = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let path = dataset_dir.join(&pair.mixture);
        let mixture = read_multichannel(&path, config.sample_rate, config.room.mics)?;
        let feats = utterance_features(config, &mixture)?;
        if feats.stft.frames == 0 {
            return Err(Error::manifest(&path, "shorter than one frame"));
        }
        let record = FeatureRecord {
            id: pair.id.clone(),
            order: config.features.order,
            frames: feats.stft.frames,
            bins: feats.stft.bins,
            stft: format!("{}.stft.shtf", pair.id),
            sht: format!("{}.sht.shtf", pair.id),
        };
        TensorFile::from_real_f32(&feats.stft).write(&out_dir.join(&record.stft))?;
        TensorFile::from_real_f32(&feats.sht).write(&out_dir.join(&record.sht))?;
        records.push(record);
    }
    write_jsonl(&out_dir.join(MANIFEST), &records)?;
    Ok(records)
}

/// Reads the two tensors of `record` and checks their shapes.
pub fn load_features(config: &ExperimentConfig, dir: &Path, record: &FeatureRecord) -> Result<(RealTensor, RealTensor)> {
    let stft = TensorFile::read(&dir.join(&record.stft))?.to_real()?;
    let sht = TensorFile::read(&dir.join(&record.sht))?.to_real()?;
    let expect = [
        (&stft, config.model.stft_channels, &record.stft),
        (&sht, config.model.sht_channels, &record.sht),
    ];
    for (t, channels, name) in expect {
        if t.dims() != [record.frames, record.bins, channels] {
            return Err(Error::manifest(
                &dir.join(name),
                format!("dims {:?}, expected {:?}", t.dims(), [record.frames, record.bins, channels]),
            ));
        }
    }
    Ok((stft, sht))
}
