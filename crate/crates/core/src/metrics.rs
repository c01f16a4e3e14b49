//! Objective quality metrics: STOI and SI-SDR.
//!
//! The STOI implementation follows the reference algorithm: resampling to
//! 10 kHz with a Kaiser-windowed polyphase filter, removal of frames more
//! than 40 dB below the loudest clean frame, 15 one-third octave bands from
//! 150 Hz, 30-frame (384 ms) segments, clipping at -15 dB SDR and averaging
//! of the normalized envelope correlations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const STOI_FS: u32 = 10_000;
const STOI_FRAME: usize = 256;
const STOI_NFFT: usize = 512;
const STOI_BANDS: usize = 15;
const STOI_MIN_FREQ: f64 = 150.0;
const STOI_SEGMENT: usize = 30;
const STOI_BETA_DB: f64 = -15.0;
const STOI_DYN_RANGE: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Upper bound reported by [`si_sdr`] for (near-)perfect estimates.
pub const SI_SDR_CAP_DB: f64 = 60.0;

/// Short-time objective intelligibility of `degraded` against `clean`, in `[0, 1]`.
///
/// Inputs are truncated to the shorter length. Only magnitudes enter the
/// measure, so a sign flip of the degraded signal does not change it.
pub fn stoi(clean: &[f64], degraded: &[f64], sample_rate: u32) -> Result<f64> {
    let len = clean.len().min(degraded.len());
    if clean[..len].iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPower("clean speech"));
    }
    let (x, y) = if sample_rate == STOI_FS {
        (clean[..len].to_vec(), degraded[..len].to_vec())
    } else {
        let rs = Resampler::new(STOI_FS, sample_rate)?;
        (rs.apply(&clean[..len]), rs.apply(&degraded[..len]))
    };
    let (x, y) = remove_silent_frames(&x, &y, STOI_DYN_RANGE, STOI_FRAME, STOI_FRAME / 2);
    let x_spec = stoi_stft(&x);
    let y_spec = stoi_stft(&y);
    let frames = x_spec.len();
    if frames < STOI_SEGMENT {
        return Err(Error::TooShort {
            needed: STOI_SEGMENT,
            got: frames,
        });
    }
    let bands = third_octave_bands(STOI_FS as f64, STOI_NFFT, STOI_BANDS, STOI_MIN_FREQ);
    let x_tob = band_envelopes(&x_spec, &bands);
    let y_tob = band_envelopes(&y_spec, &bands);

    let clip = 1.0 + 10f64.powf(-STOI_BETA_DB / 20.0);
    let mut total = 0.0;
    let segments = frames - STOI_SEGMENT + 1;
    for m in STOI_SEGMENT..=frames {
        for b in 0..STOI_BANDS {
            let xs = &x_tob[b][m - STOI_SEGMENT..m];
            let ys = &y_tob[b][m - STOI_SEGMENT..m];
            let alpha = norm(xs) / (norm(ys) + EPS);
            let mut yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (yv * alpha).min(xv * clip))
                .collect();
            let mut xc = xs.to_vec();
            center(&mut yp);
            center(&mut xc);
            let ny = norm(&yp) + EPS;
            let nx = norm(&xc) + EPS;
            total += yp.iter().zip(&xc).map(|(a, b)| (a / ny) * (b / nx)).sum::<f64>();
        }
    }
    Ok((total / (segments * STOI_BANDS) as f64).clamp(0.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Symmetric Hann window without the zero end points (MATLAB `hanning`).
fn hanning(len: usize) -> Vec<f64> {
    (1..=len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    // frames start strictly before len - frame, as in the reference code
    (0..len.saturating_sub(frame)).step_by(hop)
}

fn remove_silent_frames(x: &[f64], y: &[f64], dyn_range: f64, frame: usize, hop: usize) -> (Vec<f64>, Vec<f64>) {
    let w = hanning(frame);
    let starts: Vec<usize> = frame_starts(x.len(), frame, hop).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = x[s..s + frame].iter().zip(&w).map(|(v, wv)| (v * wv).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| max - dyn_range - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (kept.len() - 1) * hop + frame;
    let mut xo = vec![0.0; out_len];
    let mut yo = vec![0.0; out_len];
    for (k, &s) in kept.iter().enumerate() {
        for n in 0..frame {
            xo[k * hop + n] += w[n] * x[s + n];
            yo[k * hop + n] += w[n] * y[s + n];
        }
    }
    (xo, yo)
}

/// Magnitude-squared spectra `|X|²` of the Hann-windowed frames.
fn stoi_stft(x: &[f64]) -> Vec<Vec<f64>> {
    let w = hanning(STOI_FRAME);
    let fft = FftPlanner::new().plan_fft_forward(STOI_NFFT);
    let mut buf = vec![Complex64::default(); STOI_NFFT];
    frame_starts(x.len(), STOI_FRAME, STOI_FRAME / 2)
        .map(|s| {
            buf.fill(Complex64::default());
            for n in 0..STOI_FRAME {
                buf[n] = Complex64::new(w[n] * x[s + n], 0.0);
            }
            fft.process(&mut buf);
            buf[..STOI_NFFT / 2 + 1].iter().map(|z| z.norm_sqr()).collect()
        })
        .collect()
}

/// Bin ranges `[lo, hi)` of the one-third octave bands.
fn third_octave_bands(fs: f64, nfft: usize, bands: usize, min_freq: f64) -> Vec<(usize, usize)> {
    let freqs: Vec<f64> = (0..=nfft / 2).map(|k| fs * k as f64 / nfft as f64).collect();
    let nearest = |target: f64| -> usize {
        let mut best = 0;
        for (i, f) in freqs.iter().enumerate() {
            if (f - target).powi(2) < (freqs[best] - target).powi(2) {
                best = i;
            }
        }
        best
    };
    (0..bands)
        .map(|k| {
            let k = k as f64;
            let lo = min_freq * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = min_freq * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// `[band][frame]` envelopes `sqrt(Σ_{k∈band} |X_k|²)`.
fn band_envelopes(spec: &[Vec<f64>], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    bands
        .iter()
        .map(|&(lo, hi)| spec.iter().map(|frame| frame[lo..hi].iter().sum::<f64>().sqrt()).collect())
        .collect()
}

/// Rational polyphase resampler by `up/down` with a Kaiser-windowed sinc
/// low-pass (60 dB rejection), matching the Octave `resample` design.
struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    half_len: usize,
}

impl Resampler {
    fn new(to_rate: u32, from_rate: u32) -> Result<Self> {
        if to_rate == 0 || from_rate == 0 {
            return Err(Error::Domain("sample rates must be positive".into()));
        }
        let g = gcd(to_rate as usize, from_rate as usize);
        let (up, down) = (to_rate as usize / g, from_rate as usize / g);
        let stopband = 1.0 / (2.0 * up.max(down) as f64);
        let roll_off = stopband / 10.0;
        let rejection_db = 60.0;
        let half = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as i64;
        let beta = 0.1102 * (rejection_db - 8.7);
        let len = (2 * half + 1) as usize;
        let i0_beta = bessel_i0(beta);
        let mut taps: Vec<f64> = (-half..=half)
            .enumerate()
            .map(|(i, t)| {
                let arg = 2.0 * stopband * t as f64;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let ideal = 2.0 * up as f64 * stopband * sinc;
                let r = 2.0 * i as f64 / (len - 1) as f64 - 1.0;
                let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                kaiser * ideal
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|h| *h = *h / sum * up as f64);
        Ok(Self {
            up,
            down,
            half_len: (len - 1) / 2,
            taps,
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (up, down) = (self.up, self.down);
        let n_in = x.len();
        let n_out = (n_in * up).div_ceil(down);
        let pre_pad = down - self.half_len % down;
        let pre_remove = (self.half_len + pre_pad) / down;
        let taps = self.taps.len();
        (0..n_out)
            .map(|j| {
                // padded filter index i maps to taps[i - pre_pad]
                let pos = (j + pre_remove) * down;
                let hi = (pos / up).min(n_in.saturating_sub(1));
                let mut acc = 0.0;
                for n in (0..=hi).rev() {
                    let i = pos - n * up;
                    if i < pre_pad {
                        continue;
                    }
                    let k = i - pre_pad;
                    if k >= taps {
                        break;
                    }
                    acc += self.taps[k] * x[n];
                }
                acc
            })
            .collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Scale-invariant signal-to-distortion ratio in dB, capped at
/// [`SI_SDR_CAP_DB`].
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            what: "SI-SDR lengths",
            expected: reference.len(),
            found: estimate.len(),
        });
    }
    let ref_energy: f64 = reference.iter().map(|x| x * x).sum();
    if !(ref_energy > 0.0) {
        return Err(Error::ZeroPower("SI-SDR reference"));
    }
    let dot: f64 = reference.iter().zip(estimate).map(|(r, e)| r * e).sum();
    let alpha = dot / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let err_energy: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (e - alpha * r).powi(2))
        .sum();
    if err_energy == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    if target_energy == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((10.0 * (target_energy / err_energy).log10()).min(SI_SDR_CAP_DB))
}

/// Metric values of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub id: String,
    pub stoi: f64,
    pub si_sdr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub utterances: Vec<UtteranceMetrics>,
}

impl MetricReport {
    pub fn push(&mut self, m: UtteranceMetrics) {
        self.utterances.push(m);
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Arithmetic mean STOI; `None` for an empty report.
    pub fn mean_stoi(&self) -> Option<f64> {
        mean(self.utterances.iter().map(|u| u.stoi))
    }

    pub fn mean_si_sdr(&self) -> Option<f64> {
        mean(self.utterances.iter().map(|u| u.si_sdr))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bessel_i0_known_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-14);
        // scipy.special.i0(5.6529)
        assert!((bessel_i0(5.6529) - 49.03245353858375).abs() < 1e-10);
    }

    #[test]
    fn resampler_preserves_low_tones() {
        let rs = Resampler::new(10_000, 16_000).unwrap();
        let x: Vec<f64> = (0..16000).map(|n| (2.0 * PI * 300.0 * n as f64 / 16000.0).sin()).collect();
        let y = rs.apply(&x);
        assert_eq!(y.len(), 10_000);
        for (m, v) in y.iter().enumerate().skip(500).take(9000) {
            let want = (2.0 * PI * 300.0 * m as f64 / 10000.0).sin();
            assert!((v - want).abs() < 2e-3, "sample {m}: {v} vs {want}");
        }
    }

    #[test]
    fn band_layout() {
        let bands = third_octave_bands(10_000.0, 512, 15, 150.0);
        assert_eq!(bands.len(), 15);
        assert!(bands.windows(2).all(|w| w[0].1 == w[1].0));
        assert_eq!(bands[0].0, 7);
    }

    #[test]
    fn si_sdr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_sdr(&x, &doubled).unwrap(), SI_SDR_CAP_DB);

        // noise orthogonal to x with |n|² = |x|²/10
        let raw: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let proj = raw.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / ex;
        let orth: Vec<f64> = raw.iter().zip(&x).map(|(a, b)| a - proj * b).collect();
        let eo: f64 = orth.iter().map(|v| v * v).sum();
        let k = (ex / 10.0 / eo).sqrt();
        let noisy: Vec<f64> = x.iter().zip(&orth).map(|(a, n)| a + k * n).collect();
        assert!((si_sdr(&x, &noisy).unwrap() - 10.0).abs() < 1e-9);

        let small: Vec<f64> = x.iter().zip(&orth).map(|(a, n)| 1e-3 * a + n).collect();
        assert!(si_sdr(&x, &small).unwrap() <= -20.0);
        assert!(si_sdr(&vec![0.0; 10], &vec![1.0; 10]).is_err());
        assert!(si_sdr(&x, &x[..10]).is_err());
    }

    #[test]
    fn si_sdr_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
        let base = si_sdr(&x, &y).unwrap();
        for g in [0.01, 0.5, 3.0, 250.0] {
            let scaled: Vec<f64> = y.iter().map(|v| v * g).collect();
            assert!((si_sdr(&x, &scaled).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn stoi_rejects_degenerate_input() {
        assert!(matches!(stoi(&vec![0.0; 16000], &vec![1.0; 16000], 16000), Err(Error::ZeroPower(_))));
        let x: Vec<f64> = (0..3000).map(|n| (n as f64 * 0.1).sin()).collect();
        assert!(matches!(stoi(&x, &x, 16000), Err(Error::TooShort { .. })));
    }

    #[test]
    fn report_means() {
        let mut r = MetricReport::default();
        assert_eq!(r.mean_stoi(), None);
        r.push(UtteranceMetrics { id: "a".into(), stoi: 0.5, si_sdr: 3.0 });
        r.push(UtteranceMetrics { id: "b".into(), stoi: 0.7, si_sdr: -1.0 });
        assert!((r.mean_stoi().unwrap() - 0.6).abs() < 1e-12);
        assert!((r.mean_si_sdr().unwrap() - 1.0).abs() < 1e-12);
    }
}
