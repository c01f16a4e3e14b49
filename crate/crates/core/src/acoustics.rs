//! Room acoustics: image-method impulse responses, plane-wave field
//! synthesis, reverberation by convolution and SNR-controlled mixing.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayGeometry};
use crate::signal::{mean_power, MultichannelSignal};
use crate::spherical::SphDirection;
use crate::{Error, Result, DEFAULT_SOUND_SPEED};

/// A shoebox room with one source and a microphone array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    /// Room extent `(Lx, Ly, Lz)` in meters; the room spans `[0, L]` per axis.
    pub dimensions: [f64; 3],
    /// Target reverberation time in seconds; 0 is anechoic.
    pub rt60: f64,
    pub source_pos: [f64; 3],
    pub array_center: [f64; 3],
    pub array: ArrayGeometry,
    pub sample_rate: u32,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    /// Cap on the total number of wall reflections per image; `None` keeps
    /// every image that arrives within the response length.
    #[serde(default)]
    pub max_order: Option<u32>,
    /// Response length in samples; `None` derives it from `rt60`.
    #[serde(default)]
    pub rir_len: Option<usize>,
}

fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

impl RoomConfig {
    /// Absolute positions of every microphone.
    pub fn mic_positions(&self) -> Vec<[f64; 3]> {
        self.array
            .positions()
            .into_iter()
            .map(|p| add(p, self.array_center))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    /// Uniform pressure reflection coefficient of all six walls.
    ///
    /// An image at distance `d` in direction `u` has undergone about
    /// `d Σ|u_i|/L_i` reflections, so in a shoebox the late decay is slower
    /// than the diffuse-field formulas predict (paths along the longest axis
    /// reflect least). The coefficient is therefore solved for on a
    /// direction-averaged model of the image lattice energy, including the
    /// direct path, so that its Schroeder T20 estimate equals `rt60`.
    pub fn reflection_coefficient(&self) -> Result<f64> {
        if !(self.rt60 >= 0.0) || !self.rt60.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid rt60 {}", self.rt60)));
        }
        if self.rt60 == 0.0 {
            return Ok(0.0);
        }
        let model = DecayModel::new(self.dimensions, distance(self.source_pos, self.array_center));
        let target = self.rt60 * self.sound_speed;
        // model T60 decreases monotonically in the per-meter attenuation `a`
        let (mut lo, mut hi) = (1e-6f64, 1e3f64);
        if model.t60_distance(lo) < target {
            return Err(Error::InvalidConfig(format!(
                "rt60 {} s needs a reflection coefficient >= 1",
                self.rt60
            )));
        }
        if model.t60_distance(hi) > target {
            return Ok(0.0);
        }
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            if model.t60_distance(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let beta = (-0.5 * (lo * hi).sqrt()).exp();
        if !(beta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rt60 {} s needs reflection coefficient {beta} >= 1",
                self.rt60
            )));
        }
        Ok(beta)
    }

    /// Response length used by [`simulate_rir`].
    pub fn response_len(&self) -> usize {
        if let Some(len) = self.rir_len {
            return len;
        }
        let fs = self.sample_rate as f64;
        let farthest = self
            .mic_positions()
            .iter()
            .map(|m| distance(*m, self.source_pos))
            .fold(0.0, f64::max);
        let direct = (farthest / self.sound_speed * fs).round() as usize;
        let tail = (self.rt60 * fs).ceil() as usize;
        (direct + tail).max(direct + 64)
    }

    fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "room dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        if !(self.sound_speed > 0.0) || self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sound speed and sample rate must be positive".into()));
        }
        if !strictly_inside(self.source_pos, self.dimensions) {
            return Err(Error::InvalidConfig(format!(
                "source {:?} is not inside the room",
                self.source_pos
            )));
        }
        for (i, m) in self.mic_positions().into_iter().enumerate() {
            if !strictly_inside(m, self.dimensions) {
                return Err(Error::InvalidConfig(format!(
                    "microphone {i} at {m:?} is not inside the room"
                )));
            }
        }
        Ok(())
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn strictly_inside(p: [f64; 3], dims: [f64; 3]) -> bool {
    p.iter().zip(dims).all(|(&x, l)| x > 0.0 && x < l)
}

/// Sample index of the direct-path arrival from the source to each microphone.
pub fn direct_path_indices(config: &RoomConfig) -> Vec<usize> {
    let fs = config.sample_rate as f64;
    config
        .mic_positions()
        .into_iter()
        .map(|m| (distance(m, config.source_pos) / config.sound_speed * fs).round() as usize)
        .collect()
}

/// Direction-averaged energy decay of a shoebox image lattice with
/// energy attenuation `exp(-a · reflections)`.
struct DecayModel {
    /// `Σ|u_i|/L_i` on a quadrature of the first octant.
    rates: Vec<f64>,
    direct: f64,
    volume: f64,
}

impl DecayModel {
    const DIRECTIONS: usize = 12;
    const STEPS: usize = 300;

    fn new(dims: [f64; 3], direct: f64) -> Self {
        let n = Self::DIRECTIONS;
        let mut rates = Vec::with_capacity(n * n);
        // uniform in cos θ and φ is uniform on the sphere
        for i in 0..n {
            let cz = (i as f64 + 0.5) / n as f64;
            let s = (1.0 - cz * cz).sqrt();
            for j in 0..n {
                let phi = (j as f64 + 0.5) / n as f64 * PI / 2.0;
                rates.push(s * phi.cos() / dims[0] + s * phi.sin() / dims[1] + cz / dims[2]);
            }
        }
        Self {
            rates,
            direct: direct.max(1e-3),
            volume: dims.iter().product(),
        }
    }

    /// Backward-integrated energy remaining beyond path length `x` meters.
    fn remaining(&self, a: f64, x: f64) -> f64 {
        let from = x.max(self.direct);
        // one image per room volume, each with energy 1/d²
        let reverb = 4.0 * PI / self.volume
            * self.rates.iter().map(|&g| (-a * g * from).exp() / (a * g)).sum::<f64>()
            / self.rates.len() as f64;
        let direct = if x <= self.direct { self.direct.powi(-2) } else { 0.0 };
        reverb + direct
    }

    /// T60 in meters of path length from a -5..-25 dB line fit.
    fn t60_distance(&self, a: f64) -> f64 {
        let g_min = self.rates.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = self.direct + 8.0 / (a * g_min);
        let e0 = self.remaining(a, 0.0);
        let pts: Vec<(f64, f64)> = (0..=Self::STEPS)
            .map(|k| {
                let x = x_max * k as f64 / Self::STEPS as f64;
                (x, 10.0 * (self.remaining(a, x) / e0).log10())
            })
            .filter(|&(_, db)| (-25.0..=-5.0).contains(&db))
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -60.0 * var / cov
    }
}

/// Image-source room impulse responses (Allen–Berkley), one per microphone.
///
/// Every image contributes `β^reflections / (4π d)` at the nearest integer
/// sample of its propagation delay `d / c · fs`.
pub fn simulate_rir(config: &RoomConfig) -> Result<MultichannelSignal> {
    config.validate()?;
    let beta = config.reflection_coefficient()?;
    let len = config.response_len();
    let fs = config.sample_rate as f64;
    let c = config.sound_speed;
    let max_dist = len as f64 / fs * c;
    let dims = config.dimensions;
    let src = config.source_pos;

    let mut channels = Vec::with_capacity(config.array.count());
    for mic in config.mic_positions() {
        let mut rir = vec![0.0; len];
        let mut reflections = vec![0.0; len];
        let reach: Vec<i64> = dims
            .iter()
            .map(|&l| (max_dist / (2.0 * l)).ceil() as i64 + 1)
            .collect();
        // per-axis image offsets and reflection counts for lattice index n and parity q
        let axis_terms = |axis: usize, n: i64, q: i64| -> (f64, u32) {
            let image = (1 - 2 * q) as f64 * src[axis] + 2.0 * n as f64 * dims[axis];
            let refl = ((n - q).abs() + n.abs()) as u32;
            (image - mic[axis], refl)
        };
        for nx in -reach[0]..=reach[0] {
            for qx in 0..2 {
                let (dx, rx) = axis_terms(0, nx, qx);
                if dx.abs() > max_dist {
                    continue;
                }
                for ny in -reach[1]..=reach[1] {
                    for qy in 0..2 {
                        let (dy, ry) = axis_terms(1, ny, qy);
                        let dxy2 = dx * dx + dy * dy;
                        if dxy2 > max_dist * max_dist {
                            continue;
                        }
                        for nz in -reach[2]..=reach[2] {
                            for qz in 0..2 {
                                let (dz, rz) = axis_terms(2, nz, qz);
                                let order = rx + ry + rz;
                                if config.max_order.is_some_and(|cap| order > cap) {
                                    continue;
                                }
                                let d = (dxy2 + dz * dz).sqrt();
                                let idx = (d / c * fs).round() as usize;
                                if idx >= len {
                                    continue;
                                }
                                let gain = if order == 0 { 1.0 } else { beta.powi(order as i32) };
                                if gain == 0.0 {
                                    continue;
                                }
                                let target = if order == 0 { &mut rir } else { &mut reflections };
                                target[idx] += gain / (4.0 * PI * d);
                            }
                        }
                    }
                }
            }
        }
        highpass(&mut reflections, REFLECTION_HIGHPASS_HZ, fs);
        rir.iter_mut().zip(&reflections).for_each(|(h, r)| *h += r);
        channels.push(rir);
    }
    MultichannelSignal::new(config.sample_rate, channels)
}

/// Cutoff of the high-pass applied to the summed reflections. Unsigned image
/// pulses pile up into a large DC component that would otherwise dominate
/// the late energy.
const REFLECTION_HIGHPASS_HZ: f64 = 100.0;

/// In-place second-order Butterworth high-pass (bilinear transform).
fn highpass(x: &mut [f64], cutoff: f64, fs: f64) {
    let w0 = 2.0 * PI * cutoff / fs;
    let alpha = w0.sin() / std::f64::consts::SQRT_2;
    let cos = w0.cos();
    let a0 = 1.0 + alpha;
    let b = [(1.0 + cos) / 2.0 / a0, -(1.0 + cos) / a0, (1.0 + cos) / 2.0 / a0];
    let a = [-2.0 * cos / a0, (1.0 - alpha) / a0];
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let y = b[0] * *v + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
        x2 = x1;
        x1 = *v;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Schroeder backward-integrated energy decay curve in dB, normalized to 0 dB
/// at the first sample.
pub fn schroeder_curve(rir: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = rir
        .iter()
        .rev()
        .map(|x| {
            acc += x * x;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| {
            if total > 0.0 && e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Reverberation time from a least-squares line fit of the Schroeder curve
/// between -5 dB and -25 dB, extrapolated to 60 dB of decay.
pub fn estimate_t60(rir: &[f64], sample_rate: u32) -> Option<f64> {
    let edc = schroeder_curve(rir);
    let points: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .filter(|(_, &db)| db <= -5.0 && db >= -25.0)
        .map(|(i, &db)| (i as f64 / sample_rate as f64, db))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_db = points.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_db)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let slope = cov / var;
    (slope < 0.0).then(|| -60.0 / slope)
}

/// One far-field plane wave: propagation direction and complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSource {
    pub direction: SphDirection,
    pub amplitude: Complex64,
}

/// Array pressures `p = V(k, Ψ) s + n` for a superposition of plane waves.
pub fn synthesize_plane_waves(
    sources: &[PlaneWaveSource],
    k: f64,
    geometry: &ArrayGeometry,
    noise: Option<&[Complex64]>,
) -> Result<Vec<Complex64>> {
    let count = geometry.count();
    let mut p = match noise {
        Some(n) if n.len() != count => {
            return Err(Error::DimensionMismatch {
                what: "noise vs microphones",
                expected: count,
                found: n.len(),
            })
        }
        Some(n) => n.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); count],
    };
    for src in sources {
        if !(src.amplitude.re.is_finite() && src.amplitude.im.is_finite()) {
            return Err(Error::Domain("plane-wave amplitude must be finite".into()));
        }
        for (pi, v) in p.iter_mut().zip(steering_vector(k, src.direction, geometry)) {
            *pi += v * src.amplitude;
        }
    }
    Ok(p)
}

/// Full linear convolution of two real sequences via FFT.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::default());
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::default());
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Reverberates a dry mono signal through every channel of `rirs`.
pub fn apply_rir(dry: &[f64], dry_rate: u32, rirs: &MultichannelSignal) -> Result<MultichannelSignal> {
    if dry_rate != rirs.sample_rate() {
        return Err(Error::SampleRateMismatch(dry_rate, rirs.sample_rate()));
    }
    let channels = rirs.channels().iter().map(|h| convolve(dry, h)).collect();
    MultichannelSignal::new(dry_rate, channels)
}

/// Repeats or truncates `samples` to exactly `len`.
pub fn loop_to_length(samples: &[f64], len: usize) -> Vec<f64> {
    if samples.is_empty() {
        return vec![0.0; len];
    }
    samples.iter().copied().cycle().take(len).collect()
}

/// Adds `noise` to `clean` so that the reference channel reaches `snr_db`.
///
/// Noise channels are looped or truncated to the clean length. The same gain
/// is applied to every noise channel. Returns the mixture and that gain.
pub fn mix_at_snr(
    clean: &MultichannelSignal,
    noise: &MultichannelSignal,
    snr_db: f64,
    ref_channel: usize,
) -> Result<(MultichannelSignal, f64)> {
    if clean.num_channels() != noise.num_channels() {
        return Err(Error::DimensionMismatch {
            what: "noise channels",
            expected: clean.num_channels(),
            found: noise.num_channels(),
        });
    }
    if clean.sample_rate() != noise.sample_rate() {
        return Err(Error::SampleRateMismatch(clean.sample_rate(), noise.sample_rate()));
    }
    if ref_channel >= clean.num_channels() {
        return Err(Error::Domain(format!("reference channel {ref_channel} out of range")));
    }
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("invalid SNR {snr_db}")));
    }
    let len = clean.len();
    let noise: Vec<Vec<f64>> = noise
        .channels()
        .iter()
        .map(|c| loop_to_length(c, len))
        .collect();
    let p_clean = mean_power(clean.channel(ref_channel));
    let p_noise = mean_power(&noise[ref_channel]);
    if !(p_clean > 0.0) {
        return Err(Error::ZeroPower("clean reference channel"));
    }
    if !(p_noise > 0.0) {
        return Err(Error::ZeroPower("noise reference channel"));
    }
    let scale = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = clean
        .channels()
        .iter()
        .zip(&noise)
        .map(|(c, n)| c.iter().zip(n).map(|(s, v)| s + scale * v).collect())
        .collect();
    Ok((MultichannelSignal::new(clean.sample_rate(), mixed)?, scale))
}

/// SNR in dB of a clean component against a noise component.
pub fn measure_snr(clean: &[f64], noise: &[f64]) -> f64 {
    10.0 * (mean_power(clean) / mean_power(noise)).log10()
}
