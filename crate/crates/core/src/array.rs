//! Microphone array geometry and plane-wave steering vectors.
//!
//! Positions use the spherical convention of [`SphDirection`]:
//! `(r cos φ sin θ, r sin φ sin θ, r cos θ)` relative to the array center.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spherical::SphDirection;
use crate::{Error, Result};

/// One omnidirectional microphone, relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicPosition {
    pub radius: f64,
    pub theta: f64,
    pub phi: f64,
}

impl MicPosition {
    pub fn direction(&self) -> SphDirection {
        // validated when the geometry was built
        SphDirection::new(self.theta, self.phi).expect("validated mic direction")
    }

    pub fn cartesian(&self) -> [f64; 3] {
        sph_to_cart(self.radius, self.direction())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ArrayGeometry {
    mics: Vec<MicPosition>,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    mics: Vec<MicPosition>,
}

impl TryFrom<RawGeometry> for ArrayGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        ArrayGeometry::new(raw.mics)
    }
}

impl From<ArrayGeometry> for RawGeometry {
    fn from(g: ArrayGeometry) -> Self {
        RawGeometry { mics: g.mics }
    }
}

impl ArrayGeometry {
    pub fn new(mics: Vec<MicPosition>) -> Result<Self> {
        if mics.is_empty() {
            return Err(Error::InvalidConfig("array needs at least one microphone".into()));
        }
        let mut normalized = Vec::with_capacity(mics.len());
        for (i, mic) in mics.into_iter().enumerate() {
            if !(mic.radius >= 0.0) || !mic.radius.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "microphone {i} has invalid radius {}",
                    mic.radius
                )));
            }
            let dir = SphDirection::new(mic.theta, mic.phi)
                .map_err(|e| Error::InvalidConfig(format!("microphone {i}: {e}")))?;
            normalized.push(MicPosition {
                radius: mic.radius,
                theta: dir.theta(),
                phi: dir.phi(),
            });
        }
        Ok(Self { mics: normalized })
    }

    pub fn count(&self) -> usize {
        self.mics.len()
    }

    pub fn mics(&self) -> &[MicPosition] {
        &self.mics
    }

    /// Cartesian offsets of every microphone from the array center.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.mics.iter().map(MicPosition::cartesian).collect()
    }

    /// Largest microphone distance from the center.
    pub fn radius(&self) -> f64 {
        self.mics.iter().map(|m| m.radius).fold(0.0, f64::max)
    }
}

/// `count` microphones evenly spaced on a horizontal circle (`θ = π/2`),
/// the first one on the +x axis.
pub fn uniform_circular_array(count: usize, radius: f64) -> Result<ArrayGeometry> {
    if count == 0 {
        return Err(Error::InvalidConfig("array needs at least one microphone".into()));
    }
    let mics = (0..count)
        .map(|i| MicPosition {
            radius,
            theta: PI / 2.0,
            phi: 2.0 * PI * i as f64 / count as f64,
        })
        .collect();
    ArrayGeometry::new(mics)
}

pub fn sph_to_cart(r: f64, dir: SphDirection) -> [f64; 3] {
    let [x, y, z] = dir.unit_vector();
    [r * x, r * y, r * z]
}

/// Inverse of [`sph_to_cart`]. The origin maps to `(0, θ=0, φ=0)`.
pub fn cart_to_sph(p: [f64; 3]) -> (f64, SphDirection) {
    let [x, y, z] = p;
    let r = (x * x + y * y + z * z).sqrt();
    if r == 0.0 {
        return (0.0, SphDirection::new(0.0, 0.0).expect("origin direction"));
    }
    let theta = (z / r).clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    (r, SphDirection::new(theta, phi).expect("acos/atan2 stay in range"))
}

/// Plane-wave steering vector for a source in direction `source_dir`.
///
/// The wave-number vector points against the source direction,
/// `k_l = -k (cos φ sin θ, sin φ sin θ, cos θ)`, and each entry is
/// `exp(-i k_l · r_i)`. A microphone displaced toward the source therefore
/// gets a positive phase `+k (u · r_i)`.
pub fn steering_vector(k: f64, source_dir: SphDirection, geometry: &ArrayGeometry) -> Vec<Complex64> {
    let u = source_dir.unit_vector();
    geometry
        .positions()
        .into_iter()
        .map(|p| {
            let proj = u[0] * p[0] + u[1] * p[1] + u[2] * p[2];
            Complex64::from_polar(1.0, k * proj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uca_layout() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        assert_eq!(uca.count(), 9);
        let p0 = uca.positions()[0];
        assert!((p0[0] - 0.035).abs() < 1e-15 && p0[1].abs() < 1e-15 && p0[2].abs() < 1e-15);
        let spacing = uca.mics()[1].phi - uca.mics()[0].phi;
        assert!((spacing.to_degrees() - 40.0).abs() < 1e-12);
        for p in uca.positions() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 0.035).abs() < 1e-15);
            assert_eq!(p[2], 0.0);
        }
        let single = uniform_circular_array(1, 0.0).unwrap();
        assert_eq!(single.positions()[0], [0.0, 0.0, 0.0]);
        assert!(uniform_circular_array(0, 0.1).is_err());
    }

    #[test]
    fn sph_to_cart_examples() {
        let d = |t: f64, p: f64| SphDirection::new(t, p).unwrap();
        let n = sph_to_cart(1.0, d(0.0, 1.3));
        assert!(n[0].abs() < 1e-16 && n[1].abs() < 1e-16 && n[2] == 1.0);
        let e = sph_to_cart(1.0, d(PI / 2.0, 0.0));
        assert!((e[0] - 1.0).abs() < 1e-16 && e[2].abs() < 1e-16);
        let q = sph_to_cart(2.0, d(PI / 3.0, PI / 4.0));
        assert!((q[0] - 1.2247).abs() < 1e-4 && (q[1] - 1.2247).abs() < 1e-4 && (q[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cart_to_sph_examples() {
        let (r, d) = cart_to_sph([0.0, 0.0, 1.0]);
        assert_eq!((r, d.theta(), d.phi()), (1.0, 0.0, 0.0));
        let (r, d) = cart_to_sph([1.0, 0.0, 0.0]);
        assert_eq!(r, 1.0);
        assert!((d.theta() - PI / 2.0).abs() < 1e-16 && d.phi() == 0.0);
        let (r, d) = cart_to_sph([0.0, 0.0, 0.0]);
        assert_eq!((r, d.theta(), d.phi()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn steering_examples() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let src = SphDirection::new(PI / 2.0, 0.0).unwrap();
        assert!(steering_vector(0.0, src, &uca).iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let origin = uniform_circular_array(1, 0.0).unwrap();
        assert_eq!(steering_vector(50.0, src, &origin)[0], Complex64::new(1.0, 0.0));
        let k = 2.0 * PI * 1000.0 / 343.0;
        let v0 = steering_vector(k, src, &uca)[0];
        assert!((v0.arg() - k * 0.035).abs() < 1e-12);
        assert!((v0.arg() - 0.6412).abs() < 1e-4);
    }

    #[test]
    fn geometry_serde_validates() {
        let uca = uniform_circular_array(3, 0.05).unwrap();
        let text = serde_json::to_string(&uca).unwrap();
        let back: ArrayGeometry = serde_json::from_str(&text).unwrap();
        assert_eq!(back, uca);
        let bad = r#"{"mics":[{"radius":-1.0,"theta":0.0,"phi":0.0}]}"#;
        assert!(serde_json::from_str::<ArrayGeometry>(bad).is_err());
        assert!(serde_json::from_str::<ArrayGeometry>(r#"{"mics":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_magnitude(
            k in 0.0f64..500.0, theta in 0.0f64..PI, phi in 0.0f64..6.28, r in 0.0f64..0.5
        ) {
            let uca = uniform_circular_array(7, r).unwrap();
            let src = SphDirection::new(theta, phi).unwrap();
            for v in steering_vector(k, src, &uca) {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn cartesian_round_trip(r in 1e-6f64..1e3, theta in 0.0f64..PI, phi in 0.0f64..6.283) {
            let d = SphDirection::new(theta, phi).unwrap();
            let p = sph_to_cart(r, d);
            let (r2, d2) = cart_to_sph(p);
            let q = sph_to_cart(r2, d2);
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() <= 1e-12 * r.max(1.0));
            }
            prop_assert!((r2 - r).abs() <= 1e-12 * r);
        }
    }
}
