//! Synthetic speech-like utterances and noise recordings for desk-scale runs.
//!
//! Utterances are chains of voiced syllables: a gliding harmonic series
//! shaped by three formant resonances under a raised-cosine envelope,
//! separated by pauses. Noise recordings mix a low-frequency rumble, a
//! high-frequency hiss and a few steady hums, so speech and noise occupy
//! partly different bands.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shse_core::signal::{mean_power, MultichannelSignal};
use shse_core::wav::{write_wav, WavEncoding};

use crate::config::ExperimentConfig;
use crate::io::create_dir;
use crate::seeds::{rng_for, Stream};
use crate::Result;

pub const SPEECH_RMS: f64 = 0.05;
pub const NOISE_RMS: f64 = 0.05;
const NOISE_SECONDS: f64 = 3.0;

/// One speech-like utterance of `seconds` at `rate`, normalized to [`SPEECH_RMS`].
pub fn speech_utterance(rng: &mut ChaCha8Rng, rate: u32, seconds: f64) -> Vec<f64> {
    let fs = rate as f64;
    let len = (seconds * fs).round() as usize;
    let mut out = vec![0.0; len];
    let speaker_f0 = rng.gen_range(95.0..230.0);
    let mut start = (rng.gen_range(0.05..0.2) * fs) as usize;
    while start < len {
        let dur = (rng.gen_range(0.12..0.32) * fs) as usize;
        let end = (start + dur).min(len);
        add_syllable(rng, &mut out[start..end], fs, speaker_f0);
        start = end + (rng.gen_range(0.04..0.25) * fs) as usize;
    }
    normalize(&mut out, SPEECH_RMS);
    out
}

fn add_syllable(rng: &mut ChaCha8Rng, seg: &mut [f64], fs: f64, speaker_f0: f64) {
    let n = seg.len();
    if n < 2 {
        return;
    }
    let f0_start = speaker_f0 * rng.gen_range(0.85..1.15);
    let f0_end = f0_start * rng.gen_range(0.8..1.2);
    let formants = [
        (rng.gen_range(300.0..850.0), 90.0),
        (rng.gen_range(900.0..2300.0), 120.0),
        (rng.gen_range(2400.0..3200.0), 180.0),
    ];
    let gain = |f: f64| -> f64 {
        formants
            .iter()
            .enumerate()
            .map(|(i, &(fc, bw))| {
                let x = (f - fc) / bw;
                (0.5f64).powi(i as i32) / (1.0 + x * x)
            })
            .sum()
    };
    let harmonics = ((4000.0 / f0_start.max(f0_end)) as usize).max(1);
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut phase = 0.0;
    for (i, s) in seg.iter_mut().enumerate() {
        let u = i as f64 / (n - 1) as f64;
        let f0 = f0_start + (f0_end - f0_start) * u;
        phase += 2.0 * PI * f0 / fs;
        let env = (PI * u).sin().powi(2);
        let mut v = 0.0;
        for (h, ph) in phases.iter().enumerate() {
            let k = (h + 1) as f64;
            v += gain(k * f0) * (k * phase + ph).sin();
        }
        *s += env * v;
    }
}

/// One noise recording of [`NOISE_SECONDS`], normalized to [`NOISE_RMS`].
pub fn noise_recording(rng: &mut ChaCha8Rng, rate: u32) -> Vec<f64> {
    let fs = rate as f64;
    let len = (NOISE_SECONDS * fs).round() as usize;
    let white: Vec<f64> = (0..len + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // Leaky integration gives a brown-like rumble below a few hundred Hz.
    let leak = (-2.0 * PI * 60.0 / fs).exp();
    let mut rumble = Vec::with_capacity(len);
    let mut acc = 0.0;
    for w in &white[..len] {
        acc = leak * acc + w;
        rumble.push(acc);
    }
    // Second difference of white noise tilts it toward the top of the band.
    let hiss: Vec<f64> = (0..len)
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { white[i - 1] };
            white[i + 1] - 2.0 * white[i] + prev
        })
        .collect();
    let hums: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(50.0..6000.0),
                rng.gen_range(0.1..0.5),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();

    normalize(&mut rumble, 1.0);
    let mut hiss = hiss;
    normalize(&mut hiss, 1.0);
    let w_rumble = rng.gen_range(0.3..1.0);
    let w_hiss = rng.gen_range(0.3..1.0);
    let mut out: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            let tonal: f64 = hums.iter().map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
            w_rumble * rumble[i] + w_hiss * hiss[i] + tonal
        })
        .collect();
    normalize(&mut out, NOISE_RMS);
    out
}

fn normalize(x: &mut [f64], rms: f64) {
    let p = mean_power(x);
    if p > 0.0 {
        let g = rms / p.sqrt();
        x.iter_mut().for_each(|v| *v *= g);
    }
}

pub fn speech_name(index: usize) -> String {
    format!("speech_{index:04}.wav")
}

pub fn noise_name(index: usize) -> String {
    format!("noise_{index:03}.wav")
}

/// Writes `speech/` and `noise/` corpora of mono float WAVs under `out_dir`.
pub fn cmd_synth(config: &ExperimentConfig, out_dir: &Path) -> Result<(usize, usize)> {
    config.validate()?;
    let rate = config.sample_rate;
    let speech_dir = out_dir.join("speech");
    let noise_dir = out_dir.join("noise");
    create_dir(&speech_dir)?;
    create_dir(&noise_dir)?;
    for i in 0..config.data.synth_speech {
        let mut rng = rng_for(config.seed, Stream::Speech, i as u64);
        let x = speech_utterance(&mut rng, rate, config.data.utterance_seconds);
        write_wav(&speech_dir.join(speech_name(i)), &MultichannelSignal::mono(rate, x)?, WavEncoding::Float32)?;
    }
    for i in 0..config.data.synth_noise {
        let mut rng = rng_for(config.seed, Stream::Noise, i as u64);
        let x = noise_recording(&mut rng, rate);
        write_wav(&noise_dir.join(noise_name(i)), &MultichannelSignal::mono(rate, x)?, WavEncoding::Float32)?;
    }
    Ok((config.data.synth_speech, config.data.synth_noise))
}
