//! Spherical-harmonic features per time-frequency bin and packing of the
//! real-valued network inputs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::spectral::Spectrogram;
use crate::spherical::{coefficient_count, ShtAnalysis};
use crate::{Error, Result, DEFAULT_SOUND_SPEED};

/// SHT coefficients of every bin, indexed `[frame][bin][coeff]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShtFeatures {
    order: u32,
    coeffs: Spectrogram,
}

impl ShtFeatures {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn frames(&self) -> usize {
        self.coeffs.frames()
    }

    pub fn bins(&self) -> usize {
        self.coeffs.bins()
    }

    pub fn coefficient_count(&self) -> usize {
        self.coeffs.channels()
    }

    /// The coefficients viewed as a spectrogram with `(N+1)²` channels.
    pub fn as_spectrogram(&self) -> &Spectrogram {
        &self.coeffs
    }
}

/// Frequency above which `kr` exceeds the truncation order for an array of
/// radius `radius`, i.e. `N c / (2π r)`.
pub fn sht_cutoff_frequency(radius: f64, order: u32, sound_speed: f64) -> f64 {
    if radius <= 0.0 {
        return f64::INFINITY;
    }
    order as f64 * sound_speed / (2.0 * PI * radius)
}

/// Applies the discrete SHT of `geometry` to the microphone vector of every
/// time-frequency bin of `spec`.
pub fn extract_sht_features(
    spec: &Spectrogram,
    geometry: &ArrayGeometry,
    order: u32,
) -> Result<ShtFeatures> {
    if spec.channels() != geometry.count() {
        return Err(Error::DimensionMismatch {
            what: "spectrogram channels vs microphones",
            expected: geometry.count(),
            found: spec.channels(),
        });
    }
    let analysis = ShtAnalysis::new(geometry, order)?;
    let k = coefficient_count(order);
    let mut coeffs = Spectrogram::zeros(spec.frames(), spec.bins(), k);
    {
        let out = coeffs.data_mut();
        for (bin, slot) in spec
            .data()
            .chunks_exact(spec.channels())
            .zip(out.chunks_exact_mut(k))
        {
            analysis.apply_into(bin, slot);
        }
    }
    Ok(ShtFeatures { order, coeffs })
}

/// Like [`extract_sht_features`], logging the frequency above which the
/// truncation order no longer covers `kr`.
pub fn extract_sht_features_checked(
    spec: &Spectrogram,
    geometry: &ArrayGeometry,
    order: u32,
    sample_rate: u32,
) -> Result<ShtFeatures> {
    let cutoff = sht_cutoff_frequency(geometry.radius(), order, DEFAULT_SOUND_SPEED);
    if cutoff < sample_rate as f64 / 2.0 {
        log::warn!(
            "kr exceeds order {order} above {cutoff:.0} Hz; higher bins are transformed anyway"
        );
    }
    extract_sht_features(spec, geometry, order)
}

/// Real tensor `[frames][bins][channels]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealTensor {
    pub frames: usize,
    pub bins: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl RealTensor {
    pub fn new(frames: usize, bins: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let expected = frames * bins * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "tensor data",
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

    pub fn dims(&self) -> [usize; 3] {
        [self.frames, self.bins, self.channels]
    }

    pub fn get(&self, t: usize, f: usize, c: usize) -> f64 {
        self.data[(t * self.bins + f) * self.channels + c]
    }

    /// Splits every complex channel into an adjacent `(re, im)` channel pair.
    pub fn from_complex(spec: &Spectrogram) -> Self {
        let data = spec.data().iter().flat_map(|z| [z.re, z.im]).collect();
        Self {
            frames: spec.frames(),
            bins: spec.bins(),
            channels: 2 * spec.channels(),
            data,
        }
    }

    /// Inverse of [`from_complex`](Self::from_complex).
    pub fn to_complex(&self) -> Result<Spectrogram> {
        if self.channels % 2 != 0 {
            return Err(Error::Domain(format!(
                "{} channels cannot be paired into complex values",
                self.channels
            )));
        }
        let data = self
            .data
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Spectrogram::new(self.frames, self.bins, self.channels / 2, data)
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(&self, other: &RealTensor) -> Result<RealTensor> {
        if self.frames != other.frames || self.bins != other.bins {
            return Err(Error::DimensionMismatch {
                what: "frames x bins for concatenation",
                expected: self.frames * self.bins,
                found: other.frames * other.bins,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for (a, b) in self
            .data
            .chunks_exact(self.channels)
            .zip(other.data.chunks_exact(other.channels))
        {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(RealTensor {
            frames: self.frames,
            bins: self.bins,
            channels: self.channels + other.channels,
            data,
        })
    }

    /// Keeps the first `frames` frames.
    pub fn truncate_frames(&mut self, frames: usize) {
        if frames < self.frames {
            self.frames = frames;
            self.data.truncate(frames * self.bins * self.channels);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// STFT and SHT channels concatenated into one encoder.
    Serial,
    /// Separate STFT and SHT encoders fused before the recurrent core.
    Parallel,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Serial => "serial",
            Variant::Parallel => "parallel",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Variant::Serial),
            "parallel" => Ok(Variant::Parallel),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

/// Network input for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Serial(RealTensor),
    Parallel { stft: RealTensor, sht: RealTensor },
}

impl ModelInput {
    pub fn variant(&self) -> Variant {
        match self {
            ModelInput::Serial(_) => Variant::Serial,
            ModelInput::Parallel { .. } => Variant::Parallel,
        }
    }

    pub fn frames(&self) -> usize {
        match self {
            ModelInput::Serial(t) => t.frames,
            ModelInput::Parallel { stft, .. } => stft.frames,
        }
    }

    pub fn bins(&self) -> usize {
        match self {
            ModelInput::Serial(t) => t.bins,
            ModelInput::Parallel { stft, .. } => stft.bins,
        }
    }

    /// Channel widths of the tensors in encoder order.
    pub fn channel_widths(&self) -> Vec<usize> {
        match self {
            ModelInput::Serial(t) => vec![t.channels],
            ModelInput::Parallel { stft, sht } => vec![stft.channels, sht.channels],
        }
    }

    /// Keeps the first `frames` frames of every tensor.
    pub fn truncate_frames(&mut self, frames: usize) {
        match self {
            ModelInput::Serial(t) => t.truncate_frames(frames),
            ModelInput::Parallel { stft, sht } => {
                stft.truncate_frames(frames);
                sht.truncate_frames(frames);
            }
        }
    }
}

/// Builds the real-valued input tensors from the multichannel STFT and its
/// SHT features (real/imaginary parts as adjacent channels).
pub fn pack_model_input(spec: &Spectrogram, feats: &ShtFeatures, variant: Variant) -> Result<ModelInput> {
    if spec.frames() == 0 {
        return Err(Error::Domain("empty utterance (no frames)".into()));
    }
    if spec.frames() != feats.frames() || spec.bins() != feats.bins() {
        return Err(Error::DimensionMismatch {
            what: "STFT vs SHT frames x bins",
            expected: spec.frames() * spec.bins(),
            found: feats.frames() * feats.bins(),
        });
    }
    let stft = RealTensor::from_complex(spec);
    let sht = RealTensor::from_complex(feats.as_spectrogram());
    Ok(match variant {
        Variant::Parallel => ModelInput::Parallel { stft, sht },
        Variant::Serial => ModelInput::Serial(stft.concat_channels(&sht)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::uniform_circular_array;
    use crate::spherical::{sph_harm, ShOrderIndex};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, frames: usize, bins: usize, channels: usize) -> Spectrogram {
        let data = (0..frames * bins * channels)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Spectrogram::new(frames, bins, channels, data).unwrap()
    }

    #[test]
    fn zero_spectrogram_gives_zero_features() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let f = extract_sht_features(&Spectrogram::zeros(3, 5, 9), &uca, 4).unwrap();
        assert_eq!(f.coefficient_count(), 25);
        assert!(f.as_spectrogram().data().iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn constant_bin_gives_monopole_only() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let mut spec = Spectrogram::zeros(2, 4, 9);
        let v = Complex64::new(0.3, -1.2);
        for c in 0..9 {
            spec.set(1, 2, c, v);
        }
        let f = extract_sht_features(&spec, &uca, 4).unwrap();
        let coeffs = f.as_spectrogram().bin(1, 2);
        assert!((coeffs[0] - v * (4.0 * PI).sqrt()).norm() < 1e-12);
        for idx in ShOrderIndex::all(4).filter(|i| i.m() != 0) {
            assert!(coeffs[idx.flat()].norm() < 1e-12);
        }
    }

    #[test]
    fn single_active_channel() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let mut spec = Spectrogram::zeros(1, 1, 9);
        let v = Complex64::new(2.0, 0.5);
        spec.set(0, 0, 4, v);
        let f = extract_sht_features(&spec, &uca, 4).unwrap();
        let dir = uca.mics()[4].direction();
        for idx in ShOrderIndex::all(4) {
            let want = v * sph_harm(idx, dir).conj() * (4.0 * PI / 9.0);
            assert!((f.as_spectrogram().bin(0, 0)[idx.flat()] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_geometry_mismatch() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        assert!(extract_sht_features(&Spectrogram::zeros(1, 1, 4), &uca, 4).is_err());
    }

    #[test]
    fn packing_widths() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = random_spec(&mut rng, 3, 7, 9);
        let feats = extract_sht_features(&spec, &uca, 4).unwrap();
        let par = pack_model_input(&spec, &feats, Variant::Parallel).unwrap();
        assert_eq!(par.channel_widths(), vec![18, 50]);
        let ser = pack_model_input(&spec, &feats, Variant::Serial).unwrap();
        assert_eq!(ser.channel_widths(), vec![68]);
        if let ModelInput::Serial(t) = &ser {
            assert_eq!(t.get(2, 6, 0), spec.get(2, 6, 0).re);
            assert_eq!(t.get(2, 6, 19), feats.as_spectrogram().get(2, 6, 0).im);
        }
        let empty = Spectrogram::zeros(0, 7, 9);
        let empty_feats = extract_sht_features(&empty, &uca, 4).unwrap();
        assert!(pack_model_input(&empty, &empty_feats, Variant::Serial).is_err());
        let short = Spectrogram::zeros(2, 7, 9);
        assert!(pack_model_input(&short, &feats, Variant::Parallel).is_err());
    }

    #[test]
    fn cutoff_frequency() {
        let fc = sht_cutoff_frequency(0.035, 4, 343.0);
        assert!((fc - 4.0 * 343.0 / (2.0 * PI * 0.035)).abs() < 1e-9);
        assert!(sht_cutoff_frequency(0.0, 4, 343.0).is_infinite());
    }

    proptest! {
        #[test]
        fn features_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..200) {
            let uca = uniform_circular_array(9, 0.035).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s1 = random_spec(&mut rng, 2, 3, 9);
            let s2 = random_spec(&mut rng, 2, 3, 9);
            let mix = Spectrogram::new(2, 3, 9,
                s1.data().iter().zip(s2.data()).map(|(x, y)| x * a + y * b).collect()).unwrap();
            let f = extract_sht_features(&mix, &uca, 4).unwrap();
            let f1 = extract_sht_features(&s1, &uca, 4).unwrap();
            let f2 = extract_sht_features(&s2, &uca, 4).unwrap();
            for ((z, x), y) in f.as_spectrogram().data().iter()
                .zip(f1.as_spectrogram().data()).zip(f2.as_spectrogram().data()) {
                prop_assert!((z - (x * a + y * b)).norm() < 1e-12);
            }
        }

        #[test]
        fn feature_magnitude_bound(seed in 0u64..200) {
            let uca = uniform_circular_array(9, 0.035).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, 1, 4, 9);
            let f = extract_sht_features(&spec, &uca, 4).unwrap();
            for fb in 0..4 {
                let sum_abs: f64 = spec.bin(0, fb).iter().map(|z| z.norm()).sum();
                for idx in ShOrderIndex::all(4) {
                    let ymax = uca.mics().iter().map(|m| sph_harm(idx, m.direction()).norm()).fold(0.0, f64::max);
                    let bound = 4.0 * PI / 9.0 * sum_abs * ymax;
                    prop_assert!(f.as_spectrogram().bin(0, fb)[idx.flat()].norm() <= bound + 1e-12);
                }
            }
        }

        #[test]
        fn complex_split_round_trips(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, 3, 5, 4);
            prop_assert_eq!(RealTensor::from_complex(&spec).to_complex().unwrap(), spec);
        }
    }
}
