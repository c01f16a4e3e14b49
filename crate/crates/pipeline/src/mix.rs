//! Noisy reverberant mixtures and their reference-microphone targets.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use shse_core::acoustics::{apply_rir, convolve, loop_to_length, mix_at_snr, simulate_rir};
use shse_core::signal::{mean_power, MultichannelSignal};
use shse_core::wav::{write_wav, WavEncoding};

use crate::config::{ExperimentConfig, TargetKind};
use crate::io::{create_dir, file_name, list_wavs, read_jsonl, read_mono, read_multichannel, write_jsonl};
use crate::rir::{self, Mode, Scenario};
use crate::seeds::{rng_for, split_of, sub_seed, Split, Stream};
use crate::{Error, Result};

pub const MANIFEST: &str = "pairs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub mode: Mode,
    pub split: Split,
    pub seed: u64,
    pub speech: String,
    pub noise: Vec<String>,
    pub scenario: String,
    pub rt60: f64,
    /// Requested reference-microphone SNR; `None` without noise.
    pub snr_db: Option<f64>,
    /// Gain applied to the spatialized noise.
    pub noise_scale: f64,
    /// Level normalization applied to mixture and target alike.
    pub level_gain: f64,
    /// Evaluation cell `(snr, t60)`.
    pub cell: Option<(f64, f64)>,
    pub target_kind: TargetKind,
    pub samples: usize,
    pub mixture: String,
    pub target: String,
}

struct PairPlan<'a> {
    index: usize,
    speech: &'a Path,
    scenario: &'a Scenario,
    snr_db: f64,
    cell: Option<(f64, f64)>,
}

/// Mixes every planned pair into `out_dir` and writes `pairs.jsonl`.
///
/// The scenario set's mode decides the plan: training pairs draw a scenario
/// and SNR at random and cycle through the non-test speech files; evaluation
/// pairs cross every scenario with every grid SNR and use test speech only.
pub fn cmd_mix(
    config: &ExperimentConfig,
    speech_dir: &Path,
    noise_dir: &Path,
    rir_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PairRecord>> {
    config.validate()?;
    let manifest = rir_dir.join(rir::MANIFEST);
    let scenarios: Vec<Scenario> = read_jsonl(&manifest)?;
    let mode = match scenarios.first() {
        Some(s) => s.mode,
        None => return Err(Error::manifest(&manifest, "no scenarios")),
    };
    if scenarios.iter().any(|s| s.mode != mode) {
        return Err(Error::manifest(&manifest, "scenarios mix train and eval modes"));
    }
    let speech_files = list_wavs(speech_dir)?;
    let noise_files = if config.data.noise_enabled {
        let files = list_wavs(noise_dir)?;
        if files.is_empty() {
            return Err(Error::manifest(noise_dir, "no noise WAV files"));
        }
        files
    } else {
        Vec::new()
    };
    let modulo = config.data.split_modulo;
    let pool: Vec<&Path> = speech_files
        .iter()
        .filter(|p| {
            let s = split_of(&file_name(p), modulo);
            match mode {
                Mode::Train => s != Split::Test,
                Mode::Eval => s == Split::Test,
            }
        })
        .map(|p| p.as_path())
        .collect();
    if pool.is_empty() {
        return Err(Error::manifest(speech_dir, format!("no speech files for {mode:?} pairs")));
    }

    let stream = match mode {
        Mode::Train => Stream::TrainMix,
        Mode::Eval => Stream::EvalMix,
    };
    let mut plans = Vec::new();
    match mode {
        Mode::Train => {
            let [lo, hi] = config.data.train_snr;
            for index in 0..config.data.train_pairs {
                let mut rng = rng_for(config.seed, stream, index as u64);
                let scenario = &scenarios[rng.gen_range(0..scenarios.len())];
                let snr_db = if lo == hi { lo } else { rng.gen_range(lo..hi) };
                let speech = pool[index % pool.len()];
                plans.push(PairPlan { index, speech, scenario, snr_db, cell: None });
            }
        }
        Mode::Eval => {
            for scenario in &scenarios {
                for &snr_db in &config.data.eval_snr {
                    let index = plans.len();
                    let speech = pool[index % pool.len()];
                    let cell = Some((snr_db, scenario.rt60));
                    plans.push(PairPlan { index, speech, scenario, snr_db, cell });
                }
            }
        }
    }

    create_dir(out_dir)?;
    let mut records = Vec::with_capacity(plans.len());
    for plan in &plans {
        records.push(mix_pair(config, plan, mode, &noise_files, rir_dir, out_dir)?);
    }
    write_jsonl(&out_dir.join(MANIFEST), &records)?;
    Ok(records)
}

fn mix_pair(
    config: &ExperimentConfig,
    plan: &PairPlan<'_>,
    mode: Mode,
    noise_files: &[std::path::PathBuf],
    rir_dir: &Path,
    out_dir: &Path,
) -> Result<PairRecord> {
    let rate = config.sample_rate;
    let mics = config.room.mics;
    let ref_mic = config.data.reference_mic;
    let stream = match mode {
        Mode::Train => Stream::TrainMix,
        Mode::Eval => Stream::EvalMix,
    };
    let seed = sub_seed(config.seed, stream, plan.index as u64);
    // Noise draws get their own stream so the plan draws stay stable.
    let mut rng = rng_for(seed, Stream::Noise, 0);
    let scenario = plan.scenario;

    let speech = read_mono(plan.speech, rate)?;
    let len = speech.len();
    let h = read_multichannel(&rir_dir.join(&scenario.speech_rir), rate, mics)?;
    let reverberant = truncated(apply_rir(&speech, rate, &h)?, len);
    let target = match config.data.target {
        TargetKind::Reverberant => reverberant.channel(ref_mic).to_vec(),
        TargetKind::Direct => {
            let room = scenario.room_config(config, scenario.source, 0.0)?;
            let direct = simulate_rir(&room)?;
            let mut y = convolve(&speech, direct.channel(ref_mic));
            y.truncate(len);
            y
        }
    };

    let mut noise_names = Vec::new();
    let (mixture, snr_db, noise_scale) = if noise_files.is_empty() {
        (reverberant, None, 0.0)
    } else {
        let mut spatial = vec![vec![0.0; len]; mics];
        for rir_name in &scenario.noise_rirs {
            let path = &noise_files[rng.gen_range(0..noise_files.len())];
            noise_names.push(file_name(path));
            let dry = read_mono(path, rate)?;
            let offset = rng.gen_range(0..dry.len().max(1));
            let mut rotated = dry[offset..].to_vec();
            rotated.extend_from_slice(&dry[..offset]);
            let dry = loop_to_length(&rotated, len);
            let hn = read_multichannel(&rir_dir.join(rir_name), rate, mics)?;
            let wet = truncated(apply_rir(&dry, rate, &hn)?, len);
            for (acc, ch) in spatial.iter_mut().zip(wet.channels()) {
                acc.iter_mut().zip(ch).for_each(|(a, v)| *a += v);
            }
        }
        let noise = MultichannelSignal::new(rate, spatial)?;
        let (mix, scale) = mix_at_snr(&reverberant, &noise, plan.snr_db, ref_mic)?;
        (mix, Some(plan.snr_db), scale)
    };

    let level = mean_power(mixture.channel(ref_mic)).sqrt();
    if !(level > 0.0) {
        return Err(Error::manifest(plan.speech, "silent mixture"));
    }
    let level_gain = config.data.mixture_rms / level;
    let mixture = mixture.scaled(level_gain);
    let target: Vec<f64> = target.iter().map(|v| v * level_gain).collect();

    let id = format!("{}_{:05}", scenario.id, plan.index);
    let record = PairRecord {
        mixture: format!("{id}.mixture.wav"),
        target: format!("{id}.target.wav"),
        id,
        mode,
        split: split_of(&file_name(plan.speech), config.data.split_modulo),
        seed,
        speech: file_name(plan.speech),
        noise: noise_names,
        scenario: scenario.id.clone(),
        rt60: scenario.rt60,
        snr_db,
        noise_scale,
        level_gain,
        cell: plan.cell,
        target_kind: config.data.target,
        samples: len,
    };
    write_wav(&out_dir.join(&record.mixture), &mixture, WavEncoding::Float32)?;
    write_wav(
        &out_dir.join(&record.target),
        &MultichannelSignal::mono(rate, target)?,
        WavEncoding::Float32,
    )?;
    Ok(record)
}

fn truncated(mut sig: MultichannelSignal, len: usize) -> MultichannelSignal {
    sig.truncate(len);
    sig
}
