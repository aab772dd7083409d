//! Dense frequency-domain storage and uniform-grid FFT plumbing.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::harmonics::basis_norm;

/// Tolerance on the imaginary part of quantities that are real in exact
/// arithmetic.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

pub(crate) fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue {
            residue: z.im.abs(),
            tolerance: IMAGINARY_TOLERANCE,
        });
    }
    Ok(z.re)
}

/// Coefficients on `e_ℓ` for every `ℓ` in the cube `max |ℓᵢ| <= radius`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dim: usize,
    radius: i64,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(dim: usize, radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        Spectrum {
            dim,
            radius,
            data: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    fn index(&self, freq: &[i64]) -> Option<usize> {
        let side = self.side();
        let mut idx = 0usize;
        for &l in freq {
            if l.abs() > self.radius {
                return None;
            }
            idx = idx * side + (l + self.radius) as usize;
        }
        Some(idx)
    }

    fn freq_of(&self, mut idx: usize, out: &mut [i64]) {
        let side = self.side();
        for c in out.iter_mut().rev() {
            *c = (idx % side) as i64 - self.radius;
            idx /= side;
        }
    }

    /// Coefficient at `ℓ`, zero outside the stored cube.
    pub fn get(&self, freq: &[i64]) -> Complex64 {
        self.index(freq).map_or(Complex64::new(0.0, 0.0), |i| self.data[i])
    }

    pub(crate) fn add(&mut self, freq: &[i64], value: Complex64) {
        let i = self.index(freq).expect("frequency outside spectrum radius");
        self.data[i] += value;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub(crate) fn accumulate(&mut self, other: &Spectrum) {
        debug_assert_eq!((self.dim, self.radius), (other.dim, other.radius));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn scale_by(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// Nonzero entries as `(ℓ, coefficient)`.
    pub fn nonzero(&self) -> Vec<(Vec<i64>, Complex64)> {
        let mut buf = vec![0i64; self.dim];
        self.data
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(i, &z)| {
                self.freq_of(i, &mut buf);
                (buf.clone(), z)
            })
            .collect()
    }

    /// Evaluates `Σ_ℓ S_ℓ e_ℓ(θ)` at one point; the result must be real.
    pub fn eval_at(&self, angles: &[f64]) -> Result<f64> {
        let side = self.side();
        let r = self.radius;
        // per-dimension tables of exp(i ℓ θ_i) for ℓ in [-r, r]
        let tables: Vec<Vec<Complex64>> = angles
            .iter()
            .map(|&t| (-r..=r).map(|l| Complex64::from_polar(1.0, l as f64 * t)).collect())
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &z) in self.data.iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            let mut idx = i;
            let mut phase = Complex64::new(1.0, 0.0);
            for table in tables.iter().rev() {
                phase *= table[idx % side];
                idx /= side;
            }
            acc += z * phase;
        }
        real_part(acc * basis_norm(self.dim))
    }

    /// Evaluates the expansion on the uniform grid with `grid` points per
    /// dimension (row-major, first coordinate slowest).
    pub fn eval_on_grid(&self, grid: usize) -> Result<Vec<f64>> {
        if grid < self.side() {
            return Err(Error::InvalidConfig(format!(
                "grid of {grid} points per dimension cannot resolve frequencies up to {}",
                self.radius
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); grid.pow(self.dim as u32)];
        let mut freq = vec![0i64; self.dim];
        for (i, &z) in self.data.iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            self.freq_of(i, &mut freq);
            buf[wrap_index(&freq, grid)] += z;
        }
        fft_nd(&mut buf, grid, self.dim, FftDirection::Inverse);
        let norm = basis_norm(self.dim);
        buf.into_iter().map(|z| real_part(z * norm)).collect()
    }

    /// Fourier coefficients `a_ℓ = ∫ f conj(e_ℓ)` of grid samples of `f`
    /// (row-major, `grid` points per dimension), by the trapezoid rule.
    pub fn from_grid_samples(values: &[f64], grid: usize, dim: usize, radius: i64) -> Result<Self> {
        if grid < (2 * radius + 1) as usize {
            return Err(Error::InvalidConfig(format!(
                "grid of {grid} points per dimension cannot resolve frequencies up to {radius}"
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, grid, dim, FftDirection::Forward);
        let scale = (TAU).powf(dim as f64 / 2.0) / (grid as f64).powi(dim as i32);
        let mut spec = Spectrum::zeros(dim, radius);
        let mut freq = vec![0i64; dim];
        for i in 0..spec.data.len() {
            spec.freq_of(i, &mut freq);
            spec.data[i] = buf[wrap_index(&freq, grid)] * scale;
        }
        Ok(spec)
    }
}

/// Row-major index of `ℓ mod n` in an `n^d` array.
pub(crate) fn wrap_index(freq: &[i64], n: usize) -> usize {
    freq.iter()
        .fold(0usize, |acc, &l| acc * n + l.rem_euclid(n as i64) as usize)
}

/// Points of the uniform grid with `n` points per dimension, row-major.
pub(crate) fn grid_point(mut idx: usize, n: usize, out: &mut [f64]) {
    for c in out.iter_mut().rev() {
        *c = TAU * (idx % n) as f64 / n as f64;
        idx /= n;
    }
}

/// In-place unnormalized d-dimensional FFT of a row-major `n^d` array.
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = FftPlanner::new().plan_fft(n, direction);
    if dim == 1 {
        fft.process(data);
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }
}
