//! Complex spherical harmonics and the spherical harmonics transform.
//!
//! Directions follow the array convention: `theta` is the elevation measured
//! downward from the +z axis, `phi` the azimuth measured counterclockwise
//! from the +x axis. Coefficients are stored in ACN order, i.e. the pair
//! `(n, m)` lives at flat index `n² + n + m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::{Error, Result};

/// Highest truncation order supported by the transform helpers.
pub const MAX_ORDER: u32 = 8;

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphDirection {
    theta: f64,
    phi: f64,
}

impl SphDirection {
    /// Builds a direction, wrapping `phi` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain(format!("non-finite direction ({theta}, {phi})")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("theta {theta} outside [0, π]")));
        }
        Ok(Self {
            theta,
            phi: wrap_azimuth(phi),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector `(cos φ sin θ, sin φ sin θ, cos θ)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let st = self.theta.sin();
        let ct = self.cos_theta();
        let (sp, cp) = self.phi.sin_cos();
        [cp * st, sp * st, ct]
    }

    /// `cos θ`, exactly zero on the equator so planar arrays stay planar.
    pub fn cos_theta(&self) -> f64 {
        if self.theta == PI / 2.0 {
            0.0
        } else {
            self.theta.cos()
        }
    }
}

fn wrap_azimuth(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = phi.rem_euclid(two_pi);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= two_pi {
        0.0
    } else {
        wrapped
    }
}

/// Order/degree pair `(n, m)` with `|m| <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShOrderIndex {
    n: u32,
    m: i32,
}

impl ShOrderIndex {
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::Domain(format!("degree {m} exceeds order {n}")));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    /// ACN flat index `n² + n + m`.
    pub fn flat(&self) -> usize {
        let n = self.n as i64;
        (n * n + n + self.m as i64) as usize
    }

    pub fn from_flat(index: usize) -> Self {
        let n = (index as f64).sqrt().floor() as u32;
        // guard against sqrt rounding for large indices
        let n = if ((n + 1) * (n + 1)) as usize <= index { n + 1 } else { n };
        let m = index as i64 - (n as i64 * n as i64 + n as i64);
        Self { n, m: m as i32 }
    }

    /// Every index up to and including `order`, in ACN order.
    pub fn all(order: u32) -> impl Iterator<Item = ShOrderIndex> {
        (0..coefficient_count(order)).map(Self::from_flat)
    }
}

/// Number of coefficients `(N + 1)²` of a truncation order.
pub fn coefficient_count(order: u32) -> usize {
    ((order + 1) * (order + 1)) as usize
}

/// Truncated set of spherical-harmonic coefficients in ACN order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShCoeffVector {
    order: u32,
    values: Vec<Complex64>,
}

impl ShCoeffVector {
    pub fn new(order: u32, values: Vec<Complex64>) -> Result<Self> {
        let expected = coefficient_count(order);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "SH coefficient count",
                expected,
                found: values.len(),
            });
        }
        Ok(Self { order, values })
    }

    pub fn zeros(order: u32) -> Self {
        Self {
            order,
            values: vec![Complex64::new(0.0, 0.0); coefficient_count(order)],
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, idx: ShOrderIndex) -> Complex64 {
        self.values[idx.flat()]
    }

    pub fn set(&mut self, idx: ShOrderIndex, value: Complex64) {
        self.values[idx.flat()] = value;
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// Unnormalized associated Legendre function `P_n^m(x)` for `0 <= m <= n`,
/// Condon–Shortley phase included.
///
/// Starts from the closed form of `P_m^m` and climbs in `n` with the
/// standard two-term recurrence.
pub fn assoc_legendre(n: u32, m: u32, x: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("degree {m} exceeds order {n}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(n, m, x))
}

fn legendre_unchecked(n: u32, m: u32, x: f64) -> f64 {
    // P_m^m = (-1)^m (2m-1)!! (1-x²)^{m/2}
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..m {
        pmm *= -odd * somx2;
        odd += 2.0;
    }
    if n == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if n == m + 1 {
        return pmmp1;
    }
    let mut pnm = 0.0;
    for l in (m + 2)..=n {
        pnm = ((2 * l - 1) as f64 * x * pmmp1 - (l + m - 1) as f64 * pmm) / (l - m) as f64;
        pmm = pmmp1;
        pmmp1 = pnm;
    }
    pnm
}

/// `sqrt((2n+1)/(4π) · (n-m)!/(n+m)!)` for `m >= 0`.
fn normalization(n: u32, m: u32) -> f64 {
    let mut ratio = 1.0;
    for k in (n - m + 1)..=(n + m) {
        ratio /= k as f64;
    }
    ((2 * n + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// Complex spherical harmonic `Y_n^m(θ, φ)`.
///
/// Negative degrees use `Y_n^{-m} = (-1)^m conj(Y_n^m)`.
pub fn sph_harm(idx: ShOrderIndex, dir: SphDirection) -> Complex64 {
    let n = idx.n();
    let m_abs = idx.m().unsigned_abs();
    let legendre = legendre_unchecked(n, m_abs, dir.cos_theta());
    let magnitude = normalization(n, m_abs) * legendre;
    let positive = Complex64::from_polar(1.0, m_abs as f64 * dir.phi()) * magnitude;
    if idx.m() >= 0 {
        positive
    } else if m_abs % 2 == 0 {
        positive.conj()
    } else {
        -positive.conj()
    }
}

/// Evaluates every harmonic up to `order` at `dir`, in ACN order.
pub fn sph_harm_all(order: u32, dir: SphDirection) -> Vec<Complex64> {
    ShOrderIndex::all(order).map(|idx| sph_harm(idx, dir)).collect()
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Domain(format!(
            "truncation order {order} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Precomputed analysis matrix for the discrete SHT on a fixed geometry:
/// `weights[k][i] = (4π / I) · conj(Y_k(θ_i, φ_i))`.
#[derive(Debug, Clone)]
pub struct ShtAnalysis {
    order: u32,
    mic_count: usize,
    weights: Vec<Complex64>,
}

impl ShtAnalysis {
    pub fn new(geometry: &ArrayGeometry, order: u32) -> Result<Self> {
        check_order(order)?;
        let mic_count = geometry.count();
        let scale = 4.0 * PI / mic_count as f64;
        let coeffs = coefficient_count(order);
        let mut weights = vec![Complex64::new(0.0, 0.0); coeffs * mic_count];
        for (i, mic) in geometry.mics().iter().enumerate() {
            let ys = sph_harm_all(order, mic.direction());
            for (k, y) in ys.into_iter().enumerate() {
                weights[k * mic_count + i] = y.conj() * scale;
            }
        }
        Ok(Self {
            order,
            mic_count,
            weights,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn mic_count(&self) -> usize {
        self.mic_count
    }

    pub fn coefficient_count(&self) -> usize {
        coefficient_count(self.order)
    }

    /// Writes the coefficients for one snapshot of microphone pressures.
    pub fn apply_into(&self, samples: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(samples.len(), self.mic_count);
        for (row, slot) in self.weights.chunks_exact(self.mic_count).zip(out.iter_mut()) {
            *slot = row.iter().zip(samples).map(|(w, p)| w * p).sum();
        }
    }

    pub fn apply(&self, samples: &[Complex64]) -> Result<ShCoeffVector> {
        if samples.len() != self.mic_count {
            return Err(Error::DimensionMismatch {
                what: "samples vs microphones",
                expected: self.mic_count,
                found: samples.len(),
            });
        }
        let mut values = vec![Complex64::new(0.0, 0.0); self.coefficient_count()];
        self.apply_into(samples, &mut values);
        Ok(ShCoeffVector {
            order: self.order,
            values,
        })
    }
}

/// Discrete forward SHT: `p_nm ≈ (4π/I) Σ_i p_i conj(Y_n^m(θ_i, φ_i))`.
pub fn sht_forward(
    samples: &[Complex64],
    geometry: &ArrayGeometry,
    order: u32,
) -> Result<ShCoeffVector> {
    ShtAnalysis::new(geometry, order)?.apply(samples)
}

/// Inverse SHT: synthesizes the field value at `dir` from truncated coefficients.
pub fn sht_inverse(coeffs: &ShCoeffVector, dir: SphDirection) -> Complex64 {
    ShOrderIndex::all(coeffs.order())
        .zip(coeffs.values())
        .map(|(idx, c)| c * sph_harm(idx, dir))
        .sum()
}

/// Product grid on the sphere for numerically evaluating the continuous SHT.
///
/// Elevations are equispaced including both poles; their weights are the
/// Clenshaw–Curtis weights in `cos θ`, so `Σ_j w_j g(θ_j)` equals
/// `∫ g(θ) sin θ dθ` exactly whenever `g` is a polynomial in `cos θ` of degree
/// below `n_theta`. Azimuths use the periodic trapezoidal rule.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    thetas: Vec<f64>,
    theta_weights: Vec<f64>,
    phis: Vec<f64>,
    phi_weight: f64,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 1 {
            return Err(Error::Domain(format!(
                "sphere grid {n_theta}x{n_phi} is degenerate"
            )));
        }
        let intervals = n_theta - 1;
        let thetas: Vec<f64> = (0..n_theta)
            .map(|j| PI * j as f64 / intervals as f64)
            .collect();
        let half = intervals / 2;
        let theta_weights = thetas
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                let edge = if j == 0 || j == intervals { 1.0 } else { 2.0 };
                let mut acc = 1.0;
                for k in 1..=half {
                    let b = if 2 * k == intervals { 1.0 } else { 2.0 };
                    let kf = k as f64;
                    acc -= b / (4.0 * kf * kf - 1.0) * (2.0 * kf * theta).cos();
                }
                edge / intervals as f64 * acc
            })
            .collect();
        let phis = (0..n_phi)
            .map(|l| 2.0 * PI * l as f64 / n_phi as f64)
            .collect();
        Ok(Self {
            thetas,
            theta_weights,
            phis,
            phi_weight: 2.0 * PI / n_phi as f64,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phis.len()
    }

    /// All nodes with their quadrature weights (weights sum to 4π).
    pub fn nodes(&self) -> impl Iterator<Item = (SphDirection, f64)> + '_ {
        self.thetas
            .iter()
            .zip(&self.theta_weights)
            .flat_map(move |(&theta, &wt)| {
                self.phis.iter().map(move |&phi| {
                    let dir = SphDirection { theta, phi };
                    (dir, wt * self.phi_weight)
                })
            })
    }

    /// Weighted inner product `∫ f g* dΩ` of two fields over the sphere.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Complex64
    where
        F: Fn(SphDirection) -> Complex64,
        G: Fn(SphDirection) -> Complex64,
    {
        self.nodes().map(|(dir, w)| f(dir) * g(dir).conj() * w).sum()
    }
}

/// Numerical continuous SHT `∫∫ p(θ,φ) conj(Y_n^m(θ,φ)) sin θ dθ dφ` of a field
/// sampled on `grid`.
///
/// Rejects grids with fewer than `2(n+1)` points along either angle.
pub fn sht_quadrature<F>(field: F, grid: &SphereGrid, idx: ShOrderIndex) -> Result<Complex64>
where
    F: Fn(SphDirection) -> Complex64,
{
    let needed = 2 * (idx.n() as usize + 1);
    if grid.n_theta() < needed || grid.n_phi() < needed {
        return Err(Error::Domain(format!(
            "grid {}x{} too coarse for order {} (need {needed} per dimension)",
            grid.n_theta(),
            grid.n_phi(),
            idx.n()
        )));
    }
    Ok(grid.inner_product(field, |dir| sph_harm(idx, dir)))
}

/// Minimum source distance `8 r² f / c` for the far-field (plane-wave)
/// assumption to hold for an array of radius `r`.
pub fn far_field_min_distance(array_radius: f64, freq: f64, sound_speed: f64) -> Result<f64> {
    if !(sound_speed > 0.0) {
        return Err(Error::Domain(format!(
            "sound speed must be positive, got {sound_speed}"
        )));
    }
    if !(array_radius >= 0.0) || !(freq >= 0.0) {
        return Err(Error::Domain(format!(
            "radius and frequency must be non-negative, got {array_radius} m, {freq} Hz"
        )));
    }
    Ok(8.0 * array_radius * array_radius * freq / sound_speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::uniform_circular_array;

    fn dir(theta: f64, phi: f64) -> SphDirection {
        SphDirection::new(theta, phi).unwrap()
    }

    fn idx(n: u32, m: i32) -> ShOrderIndex {
        ShOrderIndex::new(n, m).unwrap()
    }

    // Rodrigues: P_n^m(x) = (-1)^m (1-x²)^{m/2} / (2^n n!) d^{n+m}/dx^{n+m} (x²-1)^n,
    // expanded term by term as a polynomial.
    fn rodrigues(n: u32, m: u32, x: f64) -> f64 {
        let n_i = n as i64;
        // (x²-1)^n = Σ_k C(n,k) (-1)^{n-k} x^{2k}
        let mut coeffs = vec![0.0f64; (2 * n + 1) as usize];
        for k in 0..=n_i {
            let binom = (0..k).fold(1.0, |acc, j| acc * (n_i - j) as f64 / (j + 1) as f64);
            let sign = if (n_i - k) % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[(2 * k) as usize] = binom * sign;
        }
        for _ in 0..(n + m) {
            coeffs = coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| c * p as f64)
                .collect();
            if coeffs.is_empty() {
                coeffs.push(0.0);
            }
        }
        let poly: f64 = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 - x * x).powf(m as f64 / 2.0) * poly / (2f64.powi(n as i32) * fact)
    }

    #[test]
    fn legendre_trivial_values() {
        assert_eq!(assoc_legendre(0, 0, 0.3).unwrap(), 1.0);
        assert_eq!(assoc_legendre(1, 0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn legendre_matches_rodrigues_at_4_3() {
        let got = assoc_legendre(4, 3, 0.2).unwrap();
        let want = rodrigues(4, 3, 0.2);
        // closed form: -105 x (1-x²)^{3/2}
        let closed = -105.0 * 0.2 * (1.0f64 - 0.04).powf(1.5);
        assert!((want - closed).abs() < 1e-12, "oracle self-check {want} vs {closed}");
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn legendre_recurrence_consistent_with_rodrigues() {
        for n in 0..=6u32 {
            for m in 0..=n {
                for k in 0..=100 {
                    let x = -1.0 + 2.0 * k as f64 / 100.0;
                    let got = assoc_legendre(n, m, x).unwrap();
                    let want = rodrigues(n, m, x);
                    let tol = 1e-10 * want.abs().max(1e-3);
                    assert!((got - want).abs() <= tol, "P_{n}^{m}({x}) = {got}, oracle {want}");
                }
            }
        }
    }

    #[test]
    fn legendre_domain_errors() {
        assert!(assoc_legendre(2, 3, 0.0).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
        assert!(assoc_legendre(2, 1, f64::NAN).is_err());
    }

    #[test]
    fn harmonic_examples() {
        let y00 = sph_harm(idx(0, 0), dir(0.7, 2.1));
        assert!((y00.re - 0.2820948).abs() < 1e-7 && y00.im == 0.0);
        let y10 = sph_harm(idx(1, 0), dir(0.0, 0.0));
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((y10.re - 0.4886025).abs() < 1e-7);
        let d = dir(1.1, 0.7);
        let neg = sph_harm(idx(3, -2), d);
        let pos = sph_harm(idx(3, 2), d);
        assert_eq!(neg, pos.conj());
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        for n in 0..=MAX_ORDER {
            for m in 1..=n as i32 {
                for &(t, p) in &[(0.3, 0.1), (1.2, 4.0), (2.9, 5.5), (PI / 2.0, 3.0)] {
                    let d = dir(t, p);
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    assert_eq!(sph_harm(idx(n, -m), d), sph_harm(idx(n, m), d).conj() * sign);
                }
            }
        }
    }

    #[test]
    fn flat_index_is_a_bijection() {
        for (k, i) in ShOrderIndex::all(MAX_ORDER).enumerate() {
            assert_eq!(i.flat(), k);
            assert!(i.m().unsigned_abs() <= i.n());
        }
        assert_eq!(ShOrderIndex::from_flat(0), idx(0, 0));
        assert_eq!(ShOrderIndex::from_flat(1), idx(1, -1));
        assert_eq!(ShOrderIndex::from_flat(24), idx(4, 4));
        assert!(ShOrderIndex::new(1, 2).is_err());
    }

    #[test]
    fn direction_normalizes_azimuth() {
        let d = dir(1.0, -PI / 2.0);
        assert!((d.phi() - 1.5 * PI).abs() < 1e-15);
        assert_eq!(dir(1.0, 2.0 * PI).phi(), 0.0);
        assert!(SphDirection::new(-0.1, 0.0).is_err());
        assert!(SphDirection::new(3.2, 0.0).is_err());
    }

    #[test]
    fn forward_on_uca_constant_field() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 9];
        let c = sht_forward(&ones, &uca, 4).unwrap();
        assert!((c.get(idx(0, 0)).re - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert!((c.get(idx(0, 0)).re - 3.5449).abs() < 1e-4);
        for i in ShOrderIndex::all(4).filter(|i| i.m() != 0) {
            assert!(c.get(i).norm() < 1e-12, "{i:?} = {}", c.get(i));
        }
    }

    #[test]
    fn forward_equatorial_null() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let samples: Vec<_> = (0..9)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos()))
            .collect();
        let c = sht_forward(&samples, &uca, 4).unwrap();
        for i in ShOrderIndex::all(4) {
            if (i.n() as i32 + i.m()) % 2 != 0 {
                assert!(c.get(i).norm() < 1e-12, "{i:?}");
            }
        }
    }

    #[test]
    fn forward_zero_and_mismatch() {
        let uca = uniform_circular_array(9, 0.035).unwrap();
        let c = sht_forward(&vec![Complex64::default(); 9], &uca, 4).unwrap();
        assert!(c.values().iter().all(|v| *v == Complex64::default()));
        assert!(sht_forward(&[Complex64::default(); 3], &uca, 4).is_err());
        assert!(sht_forward(&vec![Complex64::default(); 9], &uca, 9).is_err());
    }

    #[test]
    fn inverse_examples() {
        let mut c = ShCoeffVector::zeros(3);
        assert_eq!(sht_inverse(&c, dir(0.4, 0.2)), Complex64::default());
        c.set(idx(0, 0), Complex64::new((4.0 * PI).sqrt(), 0.0));
        for &(t, p) in &[(0.0, 0.0), (1.0, 2.0), (PI, 6.0)] {
            assert!((sht_inverse(&c, dir(t, p)) - 1.0).norm() < 1e-14);
        }
        assert!(ShCoeffVector::new(2, vec![Complex64::default(); 8]).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let grid = SphereGrid::new(64, 128).unwrap();
        let one = |_: SphDirection| Complex64::new(1.0, 0.0);
        let p00 = sht_quadrature(one, &grid, idx(0, 0)).unwrap();
        assert!((p00 - (4.0 * PI).sqrt()).norm() < 1e-6);
        let y21 = |d: SphDirection| sph_harm(idx(2, 1), d);
        assert!((sht_quadrature(y21, &grid, idx(2, 1)).unwrap() - 1.0).norm() < 1e-6);
        assert!(sht_quadrature(y21, &grid, idx(3, 0)).unwrap().norm() < 1e-6);
        let coarse = SphereGrid::new(5, 64).unwrap();
        assert!(sht_quadrature(one, &coarse, idx(2, 0)).is_err());
    }

    #[test]
    fn quadrature_round_trip_band_limited() {
        let grid = SphereGrid::new(32, 64).unwrap();
        let order = 4;
        let truth: Vec<Complex64> = (0..coefficient_count(order))
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let truth = ShCoeffVector::new(order, truth).unwrap();
        let field = |d: SphDirection| sht_inverse(&truth, d);
        let values: Vec<_> = ShOrderIndex::all(order)
            .map(|i| sht_quadrature(field, &grid, i).unwrap())
            .collect();
        let est = ShCoeffVector::new(order, values).unwrap();
        for &(t, p) in &[(0.1, 0.2), (1.5, 3.3), (2.7, 5.9)] {
            let d = dir(t, p);
            assert!((sht_inverse(&est, d) - field(d)).norm() < 1e-9);
        }
    }

    #[test]
    fn far_field_threshold() {
        let d = far_field_min_distance(0.035, 8000.0, 343.0).unwrap();
        assert!((d - 0.22857).abs() < 1e-5);
        assert!(d < 1.0);
        assert_eq!(far_field_min_distance(0.0, 5000.0, 343.0).unwrap(), 0.0);
        assert!(far_field_min_distance(0.035, 8000.0, 0.0).is_err());
        assert!(far_field_min_distance(-1.0, 8000.0, 343.0).is_err());
    }
}
