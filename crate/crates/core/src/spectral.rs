//! Short-time Fourier analysis and overlap-add synthesis with a square-root
//! Hann window.
//!
//! Frames start at sample 0 and advance by `hop`; no padding is added at
//! the signal edges, so perfect reconstruction only holds where two frames
//! overlap.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::signal::MultichannelSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    /// 32 ms frames, 16 ms shift and a 512-point transform at 16 kHz.
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 256,
            fft_size: 512,
            sample_rate: 16000,
        }
    }
}

impl StftConfig {
    /// Half-overlap configuration with `fft_size == frame_len`.
    pub fn half_overlap(frame_len: usize, sample_rate: u32) -> Self {
        Self {
            frame_len,
            hop: frame_len / 2,
            fft_size: frame_len,
            sample_rate,
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frames for a signal of `len` samples (0 if shorter than a frame).
    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop
        }
    }

    /// Length of the overlap-add output for `frames` frames.
    pub fn output_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_len
        }
    }

    /// Sample range `[hop·(overlap-1), frames·hop)` in which every sample is
    /// covered by a full set of overlapping frames (for half overlap:
    /// `[hop, frames·hop)`).
    pub fn reconstructable_range(&self, frames: usize) -> std::ops::Range<usize> {
        let overlap = self.frame_len.div_ceil(self.hop);
        let start = self.hop * overlap.saturating_sub(1);
        let end = self.output_len(frames).saturating_sub(start);
        start..end.max(start)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::InvalidConfig(format!(
                "frame length {} / hop {} are inconsistent",
                self.frame_len, self.hop
            )));
        }
        if self.fft_size < self.frame_len || self.fft_size < 2 || self.fft_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "FFT size {} must be even and at least the frame length {}",
                self.fft_size, self.frame_len
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// Periodic square-root Hann window of `frame_len` samples.
    pub fn window(&self) -> Vec<f64> {
        sqrt_hann(self.frame_len)
    }
}

/// Periodic square-root Hann window; its square sums to one at half overlap.
pub fn sqrt_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).sqrt())
        .collect()
}

/// Complex spectrogram, indexed `[frame][bin][channel]` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn new(frames: usize, bins: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        let expected = frames * bins * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "spectrogram data",
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            frames,
            bins,
            channels,
            data,
        })
    }

    pub fn zeros(frames: usize, bins: usize, channels: usize) -> Self {
        Self {
            frames,
            bins,
            channels,
            data: vec![Complex64::default(); frames * bins * channels],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    fn offset(&self, t: usize, f: usize, c: usize) -> usize {
        (t * self.bins + f) * self.channels + c
    }

    pub fn get(&self, t: usize, f: usize, c: usize) -> Complex64 {
        self.data[self.offset(t, f, c)]
    }

    pub fn set(&mut self, t: usize, f: usize, c: usize, value: Complex64) {
        let o = self.offset(t, f, c);
        self.data[o] = value;
    }

    /// All channel values of one time-frequency bin.
    pub fn bin(&self, t: usize, f: usize) -> &[Complex64] {
        let o = self.offset(t, f, 0);
        &self.data[o..o + self.channels]
    }

    /// Copy of a single channel as a one-channel spectrogram.
    pub fn select_channel(&self, c: usize) -> Spectrogram {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Spectrogram {
            frames: self.frames,
            bins: self.bins,
            channels: 1,
            data,
        }
    }
}

/// Reusable forward/inverse transforms for one configuration.
pub struct StftProcessor {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftProcessor {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: config.window(),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
            config,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn stft(&self, signal: &MultichannelSignal) -> Result<Spectrogram> {
        let cfg = &self.config;
        if signal.len() < cfg.frame_len {
            return Err(Error::TooShort {
                needed: cfg.frame_len,
                got: signal.len(),
            });
        }
        let frames = cfg.frames_for(signal.len());
        let bins = cfg.bins();
        let channels = signal.num_channels();
        let mut spec = Spectrogram::zeros(frames, bins, channels);
        let mut buf = vec![Complex64::default(); cfg.fft_size];
        for (c, samples) in signal.channels().iter().enumerate() {
            for t in 0..frames {
                let start = t * cfg.hop;
                buf.fill(Complex64::default());
                for (n, (x, w)) in samples[start..start + cfg.frame_len]
                    .iter()
                    .zip(&self.window)
                    .enumerate()
                {
                    buf[n] = Complex64::new(x * w, 0.0);
                }
                self.forward.process(&mut buf);
                for f in 0..bins {
                    spec.set(t, f, c, buf[f]);
                }
            }
        }
        Ok(spec)
    }

    /// Overlap-add synthesis with the square-root Hann window.
    ///
    /// The imaginary parts of the DC and Nyquist bins are ignored (the
    /// output is the real part of the Hermitian-extended inverse DFT).
    pub fn istft(&self, spec: &Spectrogram) -> Result<MultichannelSignal> {
        let cfg = &self.config;
        if spec.bins() != cfg.bins() {
            return Err(Error::DimensionMismatch {
                what: "spectrogram bins",
                expected: cfg.bins(),
                found: spec.bins(),
            });
        }
        let len = cfg.output_len(spec.frames());
        let n = cfg.fft_size;
        let scale = 1.0 / n as f64;
        let mut channels = vec![vec![0.0; len]; spec.channels().max(1)];
        let mut buf = vec![Complex64::default(); n];
        for (c, out) in channels.iter_mut().enumerate().take(spec.channels()) {
            for t in 0..spec.frames() {
                self.hermitian_fill(spec, t, c, &mut buf);
                self.inverse.process(&mut buf);
                let start = t * cfg.hop;
                for (k, w) in self.window.iter().enumerate() {
                    out[start + k] += buf[k].re * scale * w;
                }
            }
        }
        MultichannelSignal::new(cfg.sample_rate, channels)
    }

    fn hermitian_fill(&self, spec: &Spectrogram, t: usize, c: usize, buf: &mut [Complex64]) {
        let n = buf.len();
        let bins = spec.bins();
        buf[0] = Complex64::new(spec.get(t, 0, c).re, 0.0);
        buf[n / 2] = Complex64::new(spec.get(t, bins - 1, c).re, 0.0);
        for f in 1..bins - 1 {
            let v = spec.get(t, f, c);
            buf[f] = v;
            buf[n - f] = v.conj();
        }
    }

    /// Adjoint of [`istft`](Self::istft) for a single channel: maps a
    /// gradient on the output samples to gradients on the real and imaginary
    /// parts of every bin, returned as `[frame][bin] -> (d_re, d_im)`.
    pub fn istft_adjoint(&self, frames: usize, grad: &[f64]) -> Vec<(f64, f64)> {
        let cfg = &self.config;
        let n = cfg.fft_size;
        let bins = cfg.bins();
        let mut out = vec![(0.0, 0.0); frames * bins];
        let mut buf = vec![Complex64::default(); n];
        for t in 0..frames {
            buf.fill(Complex64::default());
            let start = t * cfg.hop;
            for (k, w) in self.window.iter().enumerate() {
                let g = grad.get(start + k).copied().unwrap_or(0.0);
                buf[k] = Complex64::new(g * w, 0.0);
            }
            self.forward.process(&mut buf);
            for f in 0..bins {
                let edge = f == 0 || f == bins - 1;
                let weight = if edge { 1.0 } else { 2.0 } / n as f64;
                let g = buf[f];
                // Re X contributes cos, Im X contributes -sin
                let d_im = if edge { 0.0 } else { weight * g.im };
                out[t * bins + f] = (weight * g.re, d_im);
            }
        }
        out
    }
}

pub fn stft(signal: &MultichannelSignal, config: &StftConfig) -> Result<Spectrogram> {
    StftProcessor::new(*config)?.stft(signal)
}

pub fn istft(spec: &Spectrogram, config: &StftConfig) -> Result<MultichannelSignal> {
    StftProcessor::new(*config)?.istft(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> MultichannelSignal {
        let data = (0..channels)
            .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        MultichannelSignal::new(16000, data).unwrap()
    }

    #[test]
    fn default_framing() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.bins(), 257);
        assert_eq!(cfg.frames_for(16000), 1 + (16000 - 512) / 256);
        assert_eq!(cfg.frames_for(511), 0);
        assert_eq!(cfg.reconstructable_range(10), 256..2560);
    }

    #[test]
    fn window_is_cola_at_half_overlap() {
        let w = sqrt_hann(512);
        for n in 0..256 {
            let s = w[n] * w[n] + w[n + 256] * w[n + 256];
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let sig = MultichannelSignal::zeros(16000, 2, 2000).unwrap();
        let spec = stft(&sig, &StftConfig::default()).unwrap();
        assert!(spec.data().iter().all(|v| *v == Complex64::default()));
        let back = istft(&Spectrogram::zeros(4, 257, 1), &StftConfig::default()).unwrap();
        assert!(back.channel(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let sig = MultichannelSignal::zeros(16000, 1, 100).unwrap();
        assert!(matches!(
            stft(&sig, &StftConfig::default()),
            Err(Error::TooShort { needed: 512, got: 100 })
        ));
    }

    #[test]
    fn tone_at_bin_center_concentrates_energy() {
        let k = 37;
        let fs = 16000.0;
        let freq = k as f64 * fs / 512.0;
        let x: Vec<f64> = (0..4096).map(|n| (2.0 * PI * freq * n as f64 / fs).sin()).collect();
        let spec = stft(&MultichannelSignal::mono(16000, x).unwrap(), &StftConfig::default()).unwrap();
        for t in 0..spec.frames() {
            let total: f64 = (0..257).map(|f| spec.get(t, f, 0).norm_sqr()).sum();
            let near: f64 = (k - 1..=k + 1).map(|f| spec.get(t, f, 0).norm_sqr()).sum();
            assert!(near >= 0.99 * total);
        }
    }

    #[test]
    fn dc_signal_matches_window_spectrum() {
        let spec = stft(&MultichannelSignal::mono(16000, vec![1.0; 1024]).unwrap(), &StftConfig::default())
            .unwrap();
        let w = sqrt_hann(512);
        for t in 0..spec.frames() {
            for f in [0usize, 1, 2, 7, 256] {
                // direct DFT of the window
                let want: Complex64 = w
                    .iter()
                    .enumerate()
                    .map(|(n, &v)| Complex64::from_polar(v, -2.0 * PI * (f * n) as f64 / 512.0))
                    .sum();
                assert!((spec.get(t, f, 0) - want).norm() < 1e-9);
            }
            let b0 = spec.get(t, 0, 0).norm();
            assert!((1..257).all(|f| spec.get(t, f, 0).norm() < b0));
        }
    }

    #[test]
    fn round_trip_reconstructs_interior() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig = random_signal(&mut rng, 2, 5000);
        let proc = StftProcessor::new(cfg).unwrap();
        let back = proc.istft(&proc.stft(&sig).unwrap()).unwrap();
        let range = cfg.reconstructable_range(cfg.frames_for(5000));
        for c in 0..2 {
            for n in range.clone() {
                assert!((back.channel(c)[n] - sig.channel(c)[n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sig = random_signal(&mut rng, 1, 1536);
        let spec = stft(&sig, &cfg).unwrap();
        let w = cfg.window();
        for t in 0..spec.frames() {
            let time: f64 = (0..512).map(|n| (sig.channel(0)[t * 256 + n] * w[n]).powi(2)).sum();
            let freq: f64 = (0..257)
                .map(|f| {
                    let mult = if f == 0 || f == 256 { 1.0 } else { 2.0 };
                    mult * spec.get(t, f, 0).norm_sqr()
                })
                .sum::<f64>()
                / 512.0;
            assert!((time - freq).abs() <= 1e-9 * time);
        }
    }

    #[test]
    fn istft_is_linear() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rand_spec = || {
            let data = (0..6 * 257)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            Spectrogram::new(6, 257, 1, data).unwrap()
        };
        let (s1, s2) = (rand_spec(), rand_spec());
        let (a, b) = (0.7, -2.5);
        let combo = Spectrogram::new(
            6,
            257,
            1,
            s1.data().iter().zip(s2.data()).map(|(x, y)| x * a + y * b).collect(),
        )
        .unwrap();
        let y = istft(&combo, &cfg).unwrap();
        let y1 = istft(&s1, &cfg).unwrap();
        let y2 = istft(&s2, &cfg).unwrap();
        for n in 0..y.len() {
            let want = a * y1.channel(0)[n] + b * y2.channel(0)[n];
            assert!((y.channel(0)[n] - want).abs() < 1e-10);
        }
        assert!(istft(&Spectrogram::zeros(2, 100, 1), &cfg).is_err());
    }

    #[test]
    fn adjoint_matches_inner_products() {
        let cfg = StftConfig::half_overlap(32, 16000);
        let proc = StftProcessor::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames = 5;
        let bins = cfg.bins();
        let data: Vec<Complex64> = (0..frames * bins)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let spec = Spectrogram::new(frames, bins, 1, data).unwrap();
        let y = proc.istft(&spec).unwrap();
        let g: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs: f64 = y.channel(0).iter().zip(&g).map(|(a, b)| a * b).sum();
        let adj = proc.istft_adjoint(frames, &g);
        let rhs: f64 = spec
            .data()
            .iter()
            .zip(&adj)
            .map(|(x, (dr, di))| x.re * dr + x.im * di)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
