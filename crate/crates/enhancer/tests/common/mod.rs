#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shse_core::features::{ModelInput, RealTensor, Variant};
use shse_core::spectral::{StftConfig, StftProcessor};
use shse_enhancer::EnhancerConfig;

/// 32-point STFT giving the 17 bins of the tiny configuration.
pub fn tiny_stft() -> StftProcessor {
    StftProcessor::new(StftConfig {
        frame_len: 32,
        hop: 16,
        fft_size: 32,
        sample_rate: 16000,
    })
    .unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, frames: usize, bins: usize, channels: usize) -> RealTensor {
    let data = (0..frames * bins * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
    RealTensor::new(frames, bins, channels, data).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, config: &EnhancerConfig, frames: usize) -> ModelInput {
    let stft = random_tensor(rng, frames, config.bins, config.stft_channels);
    let sht = random_tensor(rng, frames, config.bins, config.sht_channels);
    match config.variant {
        Variant::Parallel => ModelInput::Parallel { stft, sht },
        Variant::Serial => ModelInput::Serial(stft.concat_channels(&sht).unwrap()),
    }
}

/// A fixed batch of random inputs with smooth random targets.
pub fn tiny_batch(config: &EnhancerConfig, batch: usize, frames: usize, seed: u64) -> (Vec<ModelInput>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (frames - 1) * 16 + 32;
    let inputs = (0..batch).map(|_| random_input(&mut rng, config, frames)).collect();
    let targets = (0..batch)
        .map(|_| {
            let (a, w, ph) = (rng.gen_range(0.2..0.5), rng.gen_range(0.1..0.8), rng.gen_range(0.0..6.0));
            (0..len).map(|n| a * (w * n as f64 + ph).sin()).collect()
        })
        .collect();
    (inputs, targets)
}
