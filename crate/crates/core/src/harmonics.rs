//! Fourier analysis on the flat torus `T^d = [0, 2π)^d`.
//!
//! The basis is `e_ℓ(θ) = (2π)^{-d/2} exp(i⟨ℓ, θ⟩)` for integer frequency
//! vectors `ℓ`; each `e_ℓ` is an eigenfunction of the Laplacian with
//! eigenvalue `-ε_ℓ²`, where `ε_ℓ = |ℓ|`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer frequency vector `ℓ ∈ Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyVector(Vec<i64>);

impl FrequencyVector {
    pub fn new(components: Vec<i64>) -> Self {
        assert!(!components.is_empty(), "frequency vector needs d >= 1");
        FrequencyVector(components)
    }

    pub fn zero(d: usize) -> Self {
        Self::new(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    /// `Σ ℓᵢ²`, exact.
    pub fn norm_squared(&self) -> i64 {
        self.0.iter().map(|l| l * l).sum()
    }

    /// Laplacian eigenvalue `ε_ℓ = sqrt(Σ ℓᵢ²)`.
    pub fn eigenvalue(&self) -> f64 {
        (self.norm_squared() as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&l| l == 0)
    }

    pub fn negated(&self) -> Self {
        FrequencyVector(self.0.iter().map(|l| -l).collect())
    }

    /// Largest `|ℓᵢ|`.
    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|l| l.abs()).max().unwrap_or(0)
    }
}

impl From<Vec<i64>> for FrequencyVector {
    fn from(v: Vec<i64>) -> Self {
        Self::new(v)
    }
}

/// Derivative order `m = (m₁, …, m_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct MultiIndex {
    orders: Vec<u32>,
    total: u32,
}

impl MultiIndex {
    pub fn new(orders: Vec<u32>) -> Self {
        assert!(!orders.is_empty(), "multi-index needs d >= 1");
        let total = orders.iter().sum();
        MultiIndex { orders, total }
    }

    /// The zero multi-index (no differentiation) in dimension `d`.
    pub fn zero(d: usize) -> Self {
        Self::new(vec![0; d])
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    /// `|m| = Σ mᵢ`.
    pub fn total(&self) -> u32 {
        self.total
    }

    /// `(-1)^{|m|}`.
    pub fn sign(&self) -> f64 {
        if self.total.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Option<MultiIndex> {
        (self.dim() == other.dim())
            .then(|| MultiIndex::new(self.orders.iter().zip(&other.orders).map(|(a, b)| a + b).collect()))
    }

    /// Parses a comma-separated list such as `"1"` or `"1,0"`.
    pub fn parse(text: &str) -> Result<Self> {
        let orders = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidConfig(format!("bad derivative order {s:?} in multi-index {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if orders.is_empty() {
            return Err(Error::InvalidConfig("empty multi-index".into()));
        }
        Ok(MultiIndex::new(orders))
    }
}

impl TryFrom<Vec<u32>> for MultiIndex {
    type Error = String;

    fn try_from(v: Vec<u32>) -> Result<Self, String> {
        if v.is_empty() {
            Err("multi-index must have at least one component".into())
        } else {
            Ok(MultiIndex::new(v))
        }
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(m: MultiIndex) -> Self {
        m.orders
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.orders.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// A point of `T^d` with every coordinate reduced into `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(angles: Vec<f64>) -> Self {
        assert!(!angles.is_empty(), "torus point needs d >= 1");
        TorusPoint(angles.into_iter().map(reduce_angle).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for TorusPoint {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// The frequency shell `Λ_j = {ℓ : B^{j-1} < ε_ℓ < B^{j+1}}`, in
/// lexicographic order.
pub fn frequency_shell(level: usize, scale: f64, dim: usize) -> Result<Vec<FrequencyVector>> {
    check_scale_dim(scale, dim)?;
    let lower = scale.powi(level as i32 - 1);
    let upper = scale.powi(level as i32 + 1);
    Ok(frequencies_within(upper.floor() as i64, dim)
        .filter(|l| {
            let e = l.eigenvalue();
            e > lower && e < upper
        })
        .collect())
}

pub(crate) fn check_scale_dim(scale: f64, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension d must be >= 1".into()));
    }
    if !scale.is_finite() || scale <= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "scale B must satisfy B > 1 (got {scale})"
        )));
    }
    Ok(())
}

/// All `ℓ` in the cube `max |ℓᵢ| <= radius`, lexicographic.
pub(crate) fn frequencies_within(radius: i64, dim: usize) -> impl Iterator<Item = FrequencyVector> {
    let side = (2 * radius + 1) as u64;
    let count = side.pow(dim as u32);
    (0..count).map(move |mut idx| {
        let mut comps = vec![0i64; dim];
        for c in comps.iter_mut().rev() {
            *c = (idx % side) as i64 - radius;
            idx /= side;
        }
        FrequencyVector(comps)
    })
}

/// `e_ℓ(θ) = (2π)^{-d/2} exp(i⟨ℓ, θ⟩)`.
///
/// # Panics
///
/// Panics if `ℓ` and `θ` have different dimensions.
pub fn fourier_basis_eval(freq: &FrequencyVector, point: &TorusPoint) -> Complex64 {
    assert_eq!(freq.dim(), point.dim(), "dimension mismatch");
    basis_at(freq.components(), point.angles())
}

pub(crate) fn basis_at(freq: &[i64], angles: &[f64]) -> Complex64 {
    let phase: f64 = freq.iter().zip(angles).map(|(&l, &t)| l as f64 * t).sum();
    Complex64::from_polar(basis_norm(freq.len()), phase)
}

/// `(2π)^{-d/2}`, the modulus of every basis function.
pub fn basis_norm(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// The symbol of `D^m` on `e_ℓ`: `D^m e_ℓ = Π (iℓᵢ)^{mᵢ} · e_ℓ`.
///
/// # Panics
///
/// Panics if `ℓ` and `m` have different dimensions.
pub fn derivative_multiplier(freq: &FrequencyVector, order: &MultiIndex) -> Complex64 {
    assert_eq!(freq.dim(), order.dim(), "dimension mismatch");
    multiplier_of(freq.components(), order)
}

pub(crate) fn multiplier_of(freq: &[i64], order: &MultiIndex) -> Complex64 {
    let magnitude: f64 = freq
        .iter()
        .zip(order.orders())
        .map(|(&l, &m)| (l as f64).powi(m as i32))
        .product();
    i_pow(order.total()) * magnitude
}

/// `i^k`.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Geodesic (flat) distance on `T^d`.
///
/// # Panics
///
/// Panics if the points have different dimensions.
pub fn geodesic_distance(a: &TorusPoint, b: &TorusPoint) -> f64 {
    assert_eq!(a.dim(), b.dim(), "dimension mismatch");
    angular_distance(a.angles(), b.angles())
}

pub(crate) fn angular_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let delta = reduce_angle(x - y);
            let delta = delta.min(TAU - delta);
            delta * delta
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fv(v: &[i64]) -> FrequencyVector {
        FrequencyVector::new(v.to_vec())
    }

    /// Brute-force lattice count of `lo² < |ℓ|² < hi²` over a generous box.
    fn lattice_count(lo: f64, hi: f64, d: usize) -> usize {
        let r = hi.ceil() as i64 + 2;
        frequencies_within(r, d)
            .filter(|l| {
                let e2 = l.norm_squared() as f64;
                e2 > lo * lo && e2 < hi * hi
            })
            .count()
    }

    #[test]
    fn shell_level0_d1() {
        let s = frequency_shell(0, 2.0, 1).unwrap();
        assert_eq!(s, vec![fv(&[-1]), fv(&[1])]);
    }

    #[test]
    fn shell_level1_d1() {
        let s = frequency_shell(1, 2.0, 1).unwrap();
        assert_eq!(s, vec![fv(&[-3]), fv(&[-2]), fv(&[2]), fv(&[3])]);
    }

    #[test]
    fn shell_level1_d2_matches_lattice_count() {
        let s = frequency_shell(1, 2.0, 2).unwrap();
        assert_eq!(s.len(), lattice_count(1.0, 4.0, 2));
        assert_eq!(s.len(), 40);
    }

    #[test]
    fn shell_rejects_bad_config() {
        assert!(frequency_shell(0, 1.0, 1).is_err());
        assert!(frequency_shell(0, 2.0, 0).is_err());
        assert!(frequency_shell(0, f64::NAN, 1).is_err());
    }

    #[test]
    fn shell_never_contains_zero() {
        for j in 0..5 {
            for d in 1..=3 {
                assert!(frequency_shell(j, 2.0, d).unwrap().iter().all(|l| !l.is_zero()));
            }
        }
    }

    #[test]
    fn basis_examples() {
        let z = fourier_basis_eval(&fv(&[0]), &TorusPoint::new(vec![1.234]));
        assert_abs_diff_eq!(z.re, 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0);
        let z = fourier_basis_eval(&fv(&[1]), &TorusPoint::new(vec![PI]));
        assert_abs_diff_eq!(z.re, -1.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn multiplier_examples() {
        let m = derivative_multiplier(&fv(&[3]), &MultiIndex::new(vec![0]));
        assert_eq!(m, Complex64::new(1.0, 0.0));
        let m = derivative_multiplier(&fv(&[2]), &MultiIndex::new(vec![1]));
        assert_eq!(m, Complex64::new(0.0, 2.0));
        let m = derivative_multiplier(&fv(&[2, -1]), &MultiIndex::new(vec![1, 2]));
        assert_eq!(m, Complex64::new(0.0, -2.0));
    }

    #[test]
    fn multiplier_matches_finite_differences() {
        // d/dθ₁ d²/dθ₂² of e_ℓ at a fixed point, by nested central differences
        let l = fv(&[2, -1]);
        let m = MultiIndex::new(vec![1, 2]);
        let p = [0.7, 2.1];
        let h = 1e-3;
        let e = |a: f64, b: f64| basis_at(l.components(), &[a, b]);
        let d2 = |a: f64| (e(a, p[1] + h) - e(a, p[1]) * 2.0 + e(a, p[1] - h)) / (h * h);
        let fd = (d2(p[0] + h) - d2(p[0] - h)) / (2.0 * h);
        let exact = derivative_multiplier(&l, &m) * basis_at(l.components(), &p);
        assert!((fd - exact).norm() < 1e-4 * exact.norm());
    }

    #[test]
    fn distance_examples() {
        let a = TorusPoint::new(vec![0.3, 1.0]);
        assert_eq!(geodesic_distance(&a, &a), 0.0);
        let d = geodesic_distance(&TorusPoint::new(vec![0.1]), &TorusPoint::new(vec![6.2]));
        assert_abs_diff_eq!(d, TAU - 6.1, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.18319, epsilon = 1e-5);
        let d = geodesic_distance(&TorusPoint::new(vec![0.0, 0.0]), &TorusPoint::new(vec![PI, PI]));
        assert_abs_diff_eq!(d, PI * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn torus_point_reduces_angles() {
        let p = TorusPoint::new(vec![-1e-18, 7.0, -PI]);
        assert!(p.angles().iter().all(|&a| (0.0..TAU).contains(&a)));
        assert_abs_diff_eq!(p.angles()[1], 7.0 - TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(p.angles()[2], PI, epsilon = 1e-15);
    }

    #[test]
    fn uniform_grid_orthonormality() {
        // F = 3 per coordinate, 2F+1 = 7 points per dimension, d = 2
        let n = 7;
        let w = (TAU / n as f64).powi(2);
        let freqs: Vec<_> = frequencies_within(3, 2).collect();
        for a in &freqs {
            for b in &freqs {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for k in 0..n {
                        let p = [TAU * i as f64 / n as f64, TAU * k as f64 / n as f64];
                        acc += basis_at(a.components(), &p) * basis_at(b.components(), &p).conj();
                    }
                }
                acc *= w;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).norm() < 1e-12, "{a:?} {b:?} {acc}");
            }
        }
    }

    #[test]
    fn multi_index_parse() {
        let m = MultiIndex::parse("1, 0,2").unwrap();
        assert_eq!(m.orders(), &[1, 0, 2]);
        assert_eq!(m.total(), 3);
        assert_eq!(m.to_string(), "1;0;2");
        assert!(MultiIndex::parse("1,x").is_err());
    }

    fn freq_strategy(d: usize) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-20i64..=20, d)
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(l in freq_strategy(3), t in prop::collection::vec(-10.0f64..10.0, 3)) {
            let l = FrequencyVector::new(l);
            let p = TorusPoint::new(t);
            let a = fourier_basis_eval(&l, &p).conj();
            let b = fourier_basis_eval(&l.negated(), &p);
            prop_assert!((a - b).norm() < 1e-14);
            prop_assert!((fourier_basis_eval(&l, &p).norm() - basis_norm(3)).abs() < 1e-15);
        }

        #[test]
        fn multiplier_is_additive_in_order(
            l in freq_strategy(2),
            m1 in prop::collection::vec(0u32..4, 2),
            m2 in prop::collection::vec(0u32..4, 2),
        ) {
            let l = FrequencyVector::new(l);
            let (m1, m2) = (MultiIndex::new(m1), MultiIndex::new(m2));
            let lhs = derivative_multiplier(&l, &m1) * derivative_multiplier(&l, &m2);
            let rhs = derivative_multiplier(&l, &m1.checked_add(&m2).unwrap());
            prop_assert_eq!(lhs, rhs);
            let modulus: f64 = l.components().iter().zip(m1.orders())
                .map(|(&x, &k)| (x.abs() as f64).powi(k as i32)).product();
            prop_assert_eq!(derivative_multiplier(&l, &m1).norm(), modulus);
        }

        #[test]
        fn shells_cover_each_frequency_once_or_twice(l in freq_strategy(2)) {
            let l = FrequencyVector::new(l);
            prop_assume!(!l.is_zero());
            let hits: Vec<usize> = (0..8)
                .filter(|&j| frequency_shell(j, 2.0, 2).unwrap().contains(&l))
                .collect();
            prop_assert!(!hits.is_empty() && hits.len() <= 2);
            if hits.len() == 2 {
                prop_assert_eq!(hits[1], hits[0] + 1);
            }
        }

        #[test]
        fn distance_is_translation_invariant(
            a in prop::collection::vec(0.0f64..TAU, 2),
            b in prop::collection::vec(0.0f64..TAU, 2),
            s in prop::collection::vec(-20.0f64..20.0, 2),
        ) {
            let d0 = angular_distance(&a, &b);
            let a2: Vec<f64> = a.iter().zip(&s).map(|(x, t)| x + t).collect();
            let b2: Vec<f64> = b.iter().zip(&s).map(|(x, t)| x + t).collect();
            prop_assert!((angular_distance(&a2, &b2) - d0).abs() < 1e-12);
            prop_assert!((angular_distance(&b, &a) - d0).abs() < 1e-15);
        }

        #[test]
        fn distance_triangle_inequality(
            a in prop::collection::vec(0.0f64..TAU, 3),
            b in prop::collection::vec(0.0f64..TAU, 3),
            c in prop::collection::vec(0.0f64..TAU, 3),
        ) {
            let ab = angular_distance(&a, &b);
            let bc = angular_distance(&b, &c);
            let ac = angular_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
