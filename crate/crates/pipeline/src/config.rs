//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use shse_core::array::{uniform_circular_array, ArrayGeometry};
use shse_core::spectral::StftConfig;
use shse_core::features::Variant;
use shse_core::DEFAULT_SOUND_SPEED;
use shse_enhancer::EnhancerConfig;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sample_rate: u32,
    pub room: RoomSection,
    pub data: DataSection,
    pub features: FeatureSection,
    pub model: EnhancerConfig,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSection {
    pub dimensions: [f64; 3],
    /// Minimum distance of the source and every microphone from each wall.
    pub wall_margin: f64,
    pub source_distance: f64,
    pub mics: usize,
    pub array_radius: f64,
    pub sound_speed: f64,
    pub max_order: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Reference microphone of the reverberant clean speech.
    Reverberant,
    /// Reference microphone of the direct-path component only.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train_scenarios: usize,
    pub train_pairs: usize,
    pub train_rt60: [f64; 2],
    pub train_snr: [f64; 2],
    pub eval_snr: Vec<f64>,
    pub eval_t60: Vec<f64>,
    pub pairs_per_eval_case: usize,
    pub target: TargetKind,
    /// Point noise sources per scenario; each gets its own RIR.
    pub noise_sources: usize,
    /// With noise disabled the mixture is the reverberant clean speech.
    pub noise_enabled: bool,
    /// Mixture and target are scaled together so the reference microphone
    /// of the mixture has this RMS.
    pub mixture_rms: f64,
    pub reference_mic: usize,
    pub synth_speech: usize,
    pub synth_noise: usize,
    pub utterance_seconds: f64,
    /// Speech files hash to `[0, split_modulo)`: 0 is test, 1 validation,
    /// the rest training.
    pub split_modulo: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub order: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Frames per training segment.
    pub segment_frames: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            sample_rate: 16000,
            room: RoomSection {
                dimensions: [6.0, 5.0, 4.0],
                wall_margin: 0.1,
                source_distance: 1.0,
                mics: 9,
                array_radius: 0.035,
                sound_speed: DEFAULT_SOUND_SPEED,
                max_order: None,
            },
            data: DataSection {
                train_scenarios: 24,
                train_pairs: 60,
                train_rt60: [0.2, 1.0],
                train_snr: [-6.0, 6.0],
                eval_snr: vec![-5.0, 0.0, 5.0],
                eval_t60: vec![0.2, 0.3, 0.4, 0.5, 0.6],
                pairs_per_eval_case: 10,
                target: TargetKind::Reverberant,
                noise_sources: 1,
                noise_enabled: true,
                mixture_rms: 0.05,
                reference_mic: 0,
                synth_speech: 60,
                synth_noise: 8,
                utterance_seconds: 2.0,
                split_modulo: 10,
            },
            features: FeatureSection {
                order: 4,
                frame_len: 512,
                hop: 256,
                fft_size: 512,
            },
            model: EnhancerConfig::desk(Variant::Parallel),
            train: TrainSection {
                epochs: 5,
                batch_size: 4,
                learning_rate: shse_enhancer::train::DEFAULT_LEARNING_RATE,
                segment_frames: 63,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig {
            frame_len: self.features.frame_len,
            hop: self.features.hop,
            fft_size: self.features.fft_size,
            sample_rate: self.sample_rate,
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        Ok(uniform_circular_array(self.room.mics, self.room.array_radius)?)
    }

    /// The 3×5 (by default) evaluation cells as `(snr, t60)` in row-major order.
    pub fn eval_cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::new();
        for &snr in &self.data.eval_snr {
            for &t60 in &self.data.eval_t60 {
                cells.push((snr, t60));
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        let r = &self.room;
        if r.dimensions.iter().any(|&d| !(d > 0.0)) {
            return bad(format!("room dimensions must be positive, got {:?}", r.dimensions));
        }
        if !(r.wall_margin >= 0.0) || !(r.source_distance > 0.0) || !(r.array_radius >= 0.0) {
            return bad("wall_margin, source_distance and array_radius must be non-negative".into());
        }
        let inner = r.dimensions.iter().map(|d| d - 2.0 * (r.wall_margin + r.array_radius));
        if inner.clone().any(|d| d <= 0.0) {
            return bad("room too small for the array and wall margin".into());
        }
        if r.mics == 0 {
            return bad("at least one microphone is required".into());
        }
        let d = &self.data;
        for (name, [lo, hi]) in [("train_rt60", d.train_rt60), ("train_snr", d.train_snr)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("{name} must be a finite [low, high] range"));
            }
        }
        if d.train_rt60[0] < 0.0 || d.eval_t60.iter().any(|&t| !(t >= 0.0)) {
            return bad("reverberation times must be non-negative".into());
        }
        if d.eval_snr.is_empty() || d.eval_t60.is_empty() {
            return bad("evaluation grid must have at least one SNR and one T60".into());
        }
        if d.reference_mic >= r.mics {
            return bad(format!("reference_mic {} out of range", d.reference_mic));
        }
        if d.split_modulo < 3 {
            return bad("split_modulo must be at least 3".into());
        }
        if !(d.mixture_rms > 0.0) {
            return bad("mixture_rms must be positive".into());
        }
        if !(d.utterance_seconds > 0.0) {
            return bad("utterance_seconds must be positive".into());
        }
        let stft = self.stft();
        stft.validate()?;
        if stft.bins() != self.model.bins {
            return bad(format!("model expects {} bins, STFT gives {}", self.model.bins, stft.bins()));
        }
        let widths = [2 * r.mics, 2 * shse_core::spherical::coefficient_count(self.features.order)];
        let expected = (self.model.stft_channels, self.model.sht_channels);
        if (widths[0], widths[1]) != expected {
            return bad(format!(
                "model input widths {:?} do not match {} mics and order {}",
                expected, r.mics, self.features.order
            ));
        }
        self.model.validate()?;
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 || t.segment_frames == 0 {
            return bad("epochs, batch_size and segment_frames must be positive".into());
        }
        if !(t.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back: ExperimentConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn default_grid_is_three_by_five() {
        let cells = ExperimentConfig::default().eval_cells();
        assert_eq!(cells.len(), 15);
        assert_eq!(cells[0], (-5.0, 0.2));
        assert_eq!(cells[14], (5.0, 0.6));
    }

    #[test]
    fn mismatched_order_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.features.order = 2;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.model.sht_channels = 18;
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ExperimentConfig::default().to_toml() + "\nbogus = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }
}
