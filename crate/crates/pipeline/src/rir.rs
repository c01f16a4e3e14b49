//! Room scenarios and their multichannel impulse responses.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shse_core::acoustics::{distance, simulate_rir, RoomConfig};
use shse_core::signal::MultichannelSignal;
use shse_core::wav::{write_wav, WavEncoding};

use crate::config::ExperimentConfig;
use crate::io::{create_dir, write_jsonl};
use crate::seeds::{rng_for, sub_seed, Stream};
use crate::{Error, Result};

pub const MANIFEST: &str = "rirs.jsonl";

/// Which half of the experiment a scenario set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Random RT60 from the training range.
    Train,
    /// `pairs_per_eval_case` scenarios for each grid T60.
    Eval,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub mode: Mode,
    pub index: usize,
    pub seed: u64,
    pub rt60: f64,
    pub room: [f64; 3],
    pub array_center: [f64; 3],
    pub source: [f64; 3],
    pub noise_sources: Vec<[f64; 3]>,
    /// Multichannel RIR from the speech source, relative to the manifest.
    pub speech_rir: String,
    pub noise_rirs: Vec<String>,
}

impl Scenario {
    /// Room simulation for a source at `source`.
    pub fn room_config(&self, config: &ExperimentConfig, source: [f64; 3], rt60: f64) -> Result<RoomConfig> {
        Ok(RoomConfig {
            dimensions: self.room,
            rt60,
            source_pos: source,
            array_center: self.array_center,
            array: config.geometry()?,
            sample_rate: config.sample_rate,
            sound_speed: config.room.sound_speed,
            max_order: config.room.max_order,
            rir_len: None,
        })
    }
}

/// Draws array, source and noise positions that respect the wall margin.
pub fn sample_positions(
    config: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<([f64; 3], [f64; 3], Vec<[f64; 3]>)> {
    let r = &config.room;
    let dims = r.dimensions;
    let margin = r.wall_margin;
    let inside = |p: &[f64; 3]| (0..3).all(|i| p[i] >= margin && p[i] <= dims[i] - margin);
    for _ in 0..1000 {
        let lo = margin + r.array_radius;
        let center = [0, 1, 2].map(|i| rng.gen_range(lo..=dims[i] - lo));
        for _ in 0..100 {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            let s = (1.0 - z * z).sqrt();
            let dir = [s * phi.cos(), s * phi.sin(), z];
            let source = [0, 1, 2].map(|i| center[i] + r.source_distance * dir[i]);
            if !inside(&source) {
                continue;
            }
            let mut noise = Vec::with_capacity(config.data.noise_sources);
            while noise.len() < config.data.noise_sources {
                let p = [0, 1, 2].map(|i| rng.gen_range(margin..=dims[i] - margin));
                if distance(p, center) >= 0.5 {
                    noise.push(p);
                }
            }
            return Ok((center, source, noise));
        }
    }
    Err(Error::InvalidConfig(format!(
        "no source position at {} m fits the room",
        r.source_distance
    )))
}

/// Id of every scenario of `mode`, with its grid T60 in eval mode.
fn plan(config: &ExperimentConfig, mode: Mode) -> Vec<(String, Option<f64>)> {
    match mode {
        Mode::Train => (0..config.data.train_scenarios)
            .map(|i| (format!("train_{i:04}"), None))
            .collect(),
        Mode::Eval => {
            let mut out = Vec::new();
            for &t60 in &config.data.eval_t60 {
                for _ in 0..config.data.pairs_per_eval_case {
                    let i = out.len();
                    out.push((format!("eval_{i:04}"), Some(t60)));
                }
            }
            out
        }
    }
}

/// Simulates every scenario of `mode` into `out_dir`, writing one 32-bit
/// float WAV per source and the `rirs.jsonl` manifest.
pub fn cmd_rir(config: &ExperimentConfig, mode: Mode, out_dir: &Path) -> Result<Vec<Scenario>> {
    config.validate()?;
    create_dir(out_dir)?;
    let stream = match mode {
        Mode::Train => Stream::TrainRoom,
        Mode::Eval => Stream::EvalRoom,
    };
    let mut scenarios = Vec::new();
    for (index, (id, fixed)) in plan(config, mode).into_iter().enumerate() {
        let seed = sub_seed(config.seed, stream, index as u64);
        let mut rng = rng_for(config.seed, stream, index as u64);
        let rt60 = match fixed {
            Some(t) => t,
            None => {
                let [lo, hi] = config.data.train_rt60;
                if lo == hi { lo } else { rng.gen_range(lo..hi) }
            }
        };
        let (array_center, source, noise_sources) = sample_positions(config, &mut rng)?;
        let scenario = Scenario {
            speech_rir: format!("{id}.speech.wav"),
            noise_rirs: (0..noise_sources.len()).map(|k| format!("{id}.noise{k}.wav")).collect(),
            id,
            mode,
            index,
            seed,
            rt60,
            room: config.room.dimensions,
            array_center,
            source,
            noise_sources,
        };
        let speech = simulate_rir(&scenario.room_config(config, source, rt60)?)?;
        write_rir(&out_dir.join(&scenario.speech_rir), &speech)?;
        for (k, &p) in scenario.noise_sources.iter().enumerate() {
            let h = simulate_rir(&scenario.room_config(config, p, rt60)?)?;
            write_rir(&out_dir.join(&scenario.noise_rirs[k]), &h)?;
        }
        scenarios.push(scenario);
    }
    write_jsonl(&out_dir.join(MANIFEST), &scenarios)?;
    Ok(scenarios)
}

fn write_rir(path: &Path, rir: &MultichannelSignal) -> Result<()> {
    write_wav(path, rir, WavEncoding::Float32)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn positions_respect_margins_and_distance() {
        let config = ExperimentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (center, source, noise) = sample_positions(&config, &mut rng).unwrap();
            assert!((distance(center, source) - 1.0).abs() < 1e-9);
            for p in noise.iter().chain([&source]) {
                for i in 0..3 {
                    assert!(p[i] >= 0.1 && p[i] <= config.room.dimensions[i] - 0.1);
                }
            }
        }
    }

    #[test]
    fn eval_plan_covers_each_t60() {
        let config = ExperimentConfig::default();
        let plan = plan(&config, Mode::Eval);
        assert_eq!(plan.len(), 5 * config.data.pairs_per_eval_case);
        for &t in &config.data.eval_t60 {
            let n = plan.iter().filter(|p| p.1 == Some(t)).count();
            assert_eq!(n, config.data.pairs_per_eval_case);
        }
    }

    #[test]
    fn impossible_distance_is_an_error() {
        let mut config = ExperimentConfig::default();
        config.room.source_distance = 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_positions(&config, &mut rng).is_err());
    }
}
