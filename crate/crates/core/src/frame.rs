//! Toroidal needlet frames.
//!
//! Level `j` uses the frequency shell `Λ_j`, window values `b(ε_ℓ/B^j)`, and
//! a uniform tensor cubature with `N_j = 2⌈B^{j+1}⌉ + 1` points per dimension
//! and equal weights `(2π)^d / N_j^d`. The grid integrates every product
//! `e_ℓ conj(e_ℓ')` with `ℓ, ℓ' ∈ Λ_j` exactly, which makes
//!
//! ```text
//! ψ_{j,k}(θ) = sqrt(λ_{j,k}) Σ_{ℓ∈Λ_j} b(ε_ℓ/B^j) conj(e_ℓ(ξ_{j,k})) e_ℓ(θ)
//! ```
//!
//! a tight frame for the zero-mean part of `L²(T^d)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::harmonics::{
    angular_distance, basis_norm, check_scale_dim, frequency_shell, multiplier_of, FrequencyVector, MultiIndex,
    TorusPoint,
};
use crate::par;
use crate::spectral::{fft_nd, grid_point, real_part, wrap_index, Spectrum};
use crate::window::{build_window, WindowFunction};

/// Default cap on the number of cubature points of the finest level.
pub const DEFAULT_MAX_CUBATURE: u128 = 100_000_000;

/// Uniform tensor cubature of one level.
#[derive(Clone, Debug)]
pub struct CubatureLevel {
    level: usize,
    dim: usize,
    side: usize,
}

impl CubatureLevel {
    fn new(level: usize, scale: f64, dim: usize) -> Self {
        let side = 2 * scale.powi(level as i32 + 1).ceil() as usize + 1;
        CubatureLevel { level, dim, side }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Points per dimension, `N_j`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// `K_j = N_j^d`.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The common weight `λ_{j,k} = (2π)^d / K_j`.
    pub fn weight(&self) -> f64 {
        TAU.powi(self.dim as i32) / self.len() as f64
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::repeat_n(self.weight(), self.len())
    }

    /// Cubature point `ξ_{j,k}` (row-major, first coordinate slowest).
    pub fn point(&self, k: usize) -> TorusPoint {
        let mut angles = vec![0.0; self.dim];
        grid_point(k, self.side, &mut angles);
        TorusPoint::new(angles)
    }

    pub fn points(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }
}

/// One resolution level of a [`NeedletFrame`].
#[derive(Clone, Debug)]
pub struct FrameLevel {
    level: usize,
    dim: usize,
    shell: Vec<FrequencyVector>,
    window_values: Vec<f64>,
    cubature: CubatureLevel,
}

impl FrameLevel {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn shell(&self) -> &[FrequencyVector] {
        &self.shell
    }

    /// `b(ε_ℓ / B^j)` for each entry of [`shell`](Self::shell).
    pub fn window_values(&self) -> &[f64] {
        &self.window_values
    }

    pub fn cubature(&self) -> &CubatureLevel {
        &self.cubature
    }

    /// Number of needlets `K_j`.
    pub fn len(&self) -> usize {
        self.cubature.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest `|ℓᵢ|` in the shell.
    pub fn radius(&self) -> i64 {
        self.shell.iter().map(FrequencyVector::max_abs).max().unwrap_or(0)
    }

    fn shell_terms<'a>(&'a self, order: &'a MultiIndex) -> impl Iterator<Item = (&'a [i64], Complex64)> + 'a {
        self.shell
            .iter()
            .zip(&self.window_values)
            .map(move |(l, &b)| (l.components(), multiplier_of(l.components(), order) * b))
    }

    /// `ψ^{(m)}_{j,k}(θ)` by direct summation over the shell, before the
    /// imaginary part is checked.
    pub(crate) fn needlet_complex(&self, k: usize, angles: &[f64], order: &MultiIndex) -> Complex64 {
        let mut center = vec![0.0; self.dim];
        grid_point(k, self.cubature.side, &mut center);
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, term) in self.shell_terms(order) {
            let phase: f64 = l
                .iter()
                .zip(angles.iter().zip(&center))
                .map(|(&li, (&t, &c))| li as f64 * (t - c))
                .sum();
            acc += term * Complex64::from_polar(1.0, phase);
        }
        let norm = basis_norm(self.dim);
        acc * (self.cubature.weight().sqrt() * norm * norm)
    }

    /// Level coefficients `sqrt(λ) Σ_ℓ b_ℓ (iℓ)^m a_ℓ e_ℓ(ξ_k)` for all `k`,
    /// where `a_ℓ` are the entries of `spectrum`.
    pub(crate) fn coefficients_from_spectrum(&self, spectrum: &Spectrum, order: &MultiIndex) -> Result<Vec<f64>> {
        let n = self.cubature.side;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len()];
        for (l, term) in self.shell_terms(order) {
            buf[wrap_index(l, n)] += term * spectrum.get(l);
        }
        fft_nd(&mut buf, n, self.dim, FftDirection::Inverse);
        let scale = self.cubature.weight().sqrt() * basis_norm(self.dim);
        buf.into_iter().map(|z| real_part(z * scale)).collect()
    }

    /// Adds the Fourier coefficients of `Σ_k c_k ψ_{j,k}` into `spectrum`.
    pub(crate) fn add_synthesis(&self, coeffs: &[f64], spectrum: &mut Spectrum) {
        let n = self.cubature.side;
        let mut buf: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fft_nd(&mut buf, n, self.dim, FftDirection::Forward);
        let scale = self.cubature.weight().sqrt() * basis_norm(self.dim);
        for (l, &b) in self.shell.iter().zip(&self.window_values) {
            spectrum.add(l.components(), buf[wrap_index(l.components(), n)] * (b * scale));
        }
    }

    /// Fourier coefficients of the single function `ψ^{(m)}_{j,k}`.
    pub(crate) fn needlet_spectrum(&self, k: usize, order: &MultiIndex) -> Spectrum {
        let mut center = vec![0.0; self.dim];
        grid_point(k, self.cubature.side, &mut center);
        let mut spec = Spectrum::zeros(self.dim, self.radius());
        let scale = self.cubature.weight().sqrt() * basis_norm(self.dim);
        for (l, term) in self.shell_terms(order) {
            let phase: f64 = l.iter().zip(&center).map(|(&li, &c)| li as f64 * c).sum();
            spec.add(l, term * Complex64::from_polar(scale, -phase));
        }
        spec
    }
}

/// An immutable needlet frame over levels `0..=jmax`.
#[derive(Clone, Debug)]
pub struct NeedletFrame {
    scale: f64,
    dim: usize,
    window: WindowFunction,
    levels: Vec<FrameLevel>,
}

/// Builds the frame for levels `0..=jmax` with the default resource cap.
pub fn build_frame(scale: f64, dim: usize, jmax: usize) -> Result<NeedletFrame> {
    build_frame_with_cap(scale, dim, jmax, DEFAULT_MAX_CUBATURE)
}

pub fn build_frame_with_cap(scale: f64, dim: usize, jmax: usize, cap: u128) -> Result<NeedletFrame> {
    check_scale_dim(scale, dim)?;
    let finest = CubatureLevel::new(jmax, scale, dim);
    let count = (finest.side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::ResourceLimit {
            level: jmax,
            count,
            cap,
        });
    }
    let window = build_window(scale)?;
    let levels = (0..=jmax)
        .map(|level| {
            let shell = frequency_shell(level, scale, dim)?;
            let dilation = scale.powi(level as i32);
            let window_values = par::map_slice(&shell, |l| window.eval(l.eigenvalue() / dilation));
            Ok(FrameLevel {
                level,
                dim,
                shell,
                window_values,
                cubature: CubatureLevel::new(level, scale, dim),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeedletFrame {
        scale,
        dim,
        window,
        levels,
    })
}

/// Result of [`NeedletFrame::localization_profile`].
#[derive(Clone, Debug)]
pub struct LocalizationFit {
    /// Smallest `c` with `|ψ^{(m)}| <= c B^{j(|m|+d/2)} / (1 + B^j dist)^M`
    /// over the sampled points.
    pub constant: f64,
    /// `(distance, |ψ^{(m)}|)` pairs that were sampled.
    pub samples: Vec<(f64, f64)>,
}

impl NeedletFrame {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jmax(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn window(&self) -> &WindowFunction {
        &self.window
    }

    pub fn levels(&self) -> &[FrameLevel] {
        &self.levels
    }

    pub fn level(&self, level: usize) -> Result<&FrameLevel> {
        self.levels.get(level).ok_or(Error::LevelOutOfRange {
            level,
            jmax: self.jmax(),
        })
    }

    /// Largest `|ℓᵢ|` over levels `0..=up_to`.
    pub fn radius(&self, up_to: usize) -> i64 {
        self.levels[..=up_to.min(self.jmax())]
            .iter()
            .map(FrameLevel::radius)
            .max()
            .unwrap_or(0)
    }

    fn checked(&self, level: usize, k: usize) -> Result<&FrameLevel> {
        let lvl = self.level(level)?;
        if k >= lvl.len() {
            return Err(Error::IndexOutOfRange {
                level,
                k,
                count: lvl.len(),
            });
        }
        Ok(lvl)
    }

    /// Evaluates `ψ^{(m)}_{j,k}(θ)`; `k` is zero-based.
    pub fn needlet_eval(&self, level: usize, k: usize, point: &TorusPoint, order: &MultiIndex) -> Result<f64> {
        assert_eq!(point.dim(), self.dim, "dimension mismatch");
        assert_eq!(order.dim(), self.dim, "dimension mismatch");
        let lvl = self.checked(level, k)?;
        real_part(lvl.needlet_complex(k, point.angles(), order))
    }

    /// Values of `ψ^{(m)}_{j,k}` on the uniform grid with `grid` points per
    /// dimension.
    pub fn needlet_on_grid(&self, level: usize, k: usize, order: &MultiIndex, grid: usize) -> Result<Vec<f64>> {
        let lvl = self.checked(level, k)?;
        lvl.needlet_spectrum(k, order).eval_on_grid(grid)
    }

    /// `‖ψ^{(m)}_{j,k}‖_{L^p}` by the trapezoid rule on a uniform grid;
    /// `p = f64::INFINITY` gives the grid maximum.
    pub fn needlet_lp_norm(&self, level: usize, k: usize, order: &MultiIndex, p: f64, grid: usize) -> Result<f64> {
        let values = self.needlet_on_grid(level, k, order, grid)?;
        Ok(grid_lp_norm(&values, p, self.dim))
    }

    /// Samples `|ψ^{(m)}_{j,k}|` along rays leaving `ξ_{j,k}` and fits the
    /// smallest constant of the decay bound with exponent `decay`.
    ///
    /// Rays follow the coordinate axes and main diagonals, both directions;
    /// `per_ray` points are spread over geodesic lengths in `[0, π]`.
    pub fn localization_profile(
        &self,
        level: usize,
        k: usize,
        order: &MultiIndex,
        decay: f64,
        per_ray: usize,
    ) -> Result<LocalizationFit> {
        let lvl = self.checked(level, k)?;
        let d = self.dim;
        let center = lvl.cubature.point(k);
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for axis in 0..d {
            for sign in [1.0, -1.0] {
                let mut u = vec![0.0; d];
                u[axis] = sign;
                directions.push(u);
            }
        }
        if d > 1 {
            for mask in 0..(1u32 << d) {
                let u: Vec<f64> = (0..d)
                    .map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 } / (d as f64).sqrt())
                    .collect();
                directions.push(u);
            }
        }
        let dilation = self.scale.powi(level as i32);
        let amplitude = dilation.powf(order.total() as f64 + d as f64 / 2.0);
        let per_ray = per_ray.max(2);
        let mut samples = Vec::with_capacity(directions.len() * per_ray);
        for u in &directions {
            for s in 0..per_ray {
                let t = std::f64::consts::PI * s as f64 / (per_ray - 1) as f64;
                let angles: Vec<f64> = center.angles().iter().zip(u).map(|(c, ui)| c + t * ui).collect();
                let dist = angular_distance(&angles, center.angles());
                let value = real_part(lvl.needlet_complex(k, &angles, order))?.abs();
                samples.push((dist, value));
            }
        }
        let constant = samples
            .iter()
            .map(|&(dist, v)| v * (1.0 + dilation * dist).powf(decay) / amplitude)
            .fold(0.0, f64::max);
        Ok(LocalizationFit { constant, samples })
    }
}

/// Trapezoid-rule `L^p` norm of uniform-grid samples on `T^d`.
pub fn grid_lp_norm(values: &[f64], p: f64, dim: usize) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let w = TAU.powi(dim as i32) / values.len() as f64;
    let terms: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    (w * par::pairwise_sum(&terms)).powf(1.0 / p)
}
