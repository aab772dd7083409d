//! Analysis and synthesis with a needlet frame.
//!
//! The spectral path computes Fourier coefficients once and maps them to
//! every level with one FFT per level. The direct path sums needlets
//! explicitly and is kept as a reference for testing.

use std::f64::consts::TAU;

use crate::coeffs::{CoefficientArray, Provenance};
use crate::error::{Error, Result};
use crate::frame::NeedletFrame;
use crate::harmonics::{MultiIndex, TorusPoint};
use crate::par;
use crate::spectral::{grid_point, real_part, Spectrum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    Spectral,
    Direct,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalysisOptions {
    /// Largest `|ℓᵢ|` present in `f`, when known.
    pub band_limit: Option<i64>,
    /// Quadrature points per dimension; chosen automatically when `None`.
    pub grid: Option<usize>,
    pub strategy: Strategy,
}

/// Quadrature grid used by [`analyze`] for levels `0..=jmax`.
pub fn analysis_grid(frame: &NeedletFrame, jmax: usize, band_limit: Option<i64>) -> usize {
    let base = 4 * frame.scale().powi(jmax as i32 + 1).ceil() as usize + 1;
    let alias_free = band_limit.map_or(0, |l| (l + frame.radius(jmax)) as usize + 1);
    base.max(64).max(alias_free)
}

fn sample_on_grid(f: &(dyn Fn(&[f64]) -> f64 + Sync), grid: usize, dim: usize) -> Result<Vec<f64>> {
    let values = par::map_range(grid.pow(dim as u32), |i| {
        let mut p = vec![0.0; dim];
        grid_point(i, grid, &mut p);
        let v = f(&p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { value: v, point: p })
        }
    });
    values.into_iter().collect()
}

/// Needlet coefficients `β^{(m)}_{j,k} = (-1)^{|m|} ⟨f, ψ^{(m)}_{j,k}⟩` of
/// `f` for levels `0..=jmax`, which equal the plain needlet coefficients of
/// the derivative `D^m f`.
pub fn analyze(
    frame: &NeedletFrame,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    order: &MultiIndex,
    jmax: usize,
    options: AnalysisOptions,
) -> Result<CoefficientArray> {
    if jmax > frame.jmax() {
        return Err(Error::LevelOutOfRange {
            level: jmax,
            jmax: frame.jmax(),
        });
    }
    check_order(frame, order)?;
    let dim = frame.dim();
    let grid = options
        .grid
        .unwrap_or_else(|| analysis_grid(frame, jmax, options.band_limit));
    let values = sample_on_grid(f, grid, dim)?;
    let levels = match options.strategy {
        Strategy::Spectral => {
            let spectrum = Spectrum::from_grid_samples(&values, grid, dim, frame.radius(jmax))?;
            coefficients_from_spectrum(frame, &spectrum, order, jmax)?
        }
        Strategy::Direct => {
            let weight = TAU.powi(dim as i32) / values.len() as f64;
            let sign = order.sign();
            let mut out = Vec::with_capacity(jmax + 1);
            for lvl in &frame.levels()[..=jmax] {
                let coeffs = par::map_range(lvl.len(), |k| {
                    let mut p = vec![0.0; dim];
                    let mut terms = Vec::with_capacity(values.len());
                    for (i, &v) in values.iter().enumerate() {
                        grid_point(i, grid, &mut p);
                        terms.push(real_part(lvl.needlet_complex(k, &p, order))? * v);
                    }
                    Ok(sign * weight * par::pairwise_sum(&terms))
                });
                out.push(coeffs.into_iter().collect::<Result<Vec<f64>>>()?);
            }
            out
        }
    };
    CoefficientArray::new(order.clone(), levels, Provenance::ExactQuadrature)
}

/// Level-by-level coefficients of the expansion whose Fourier coefficients
/// are `spectrum`.
pub fn coefficients_from_spectrum(
    frame: &NeedletFrame,
    spectrum: &Spectrum,
    order: &MultiIndex,
    jmax: usize,
) -> Result<Vec<Vec<f64>>> {
    frame.levels()[..=jmax]
        .iter()
        .map(|lvl| lvl.coefficients_from_spectrum(spectrum, order))
        .collect()
}

fn check_order(frame: &NeedletFrame, order: &MultiIndex) -> Result<()> {
    if order.dim() != frame.dim() {
        return Err(Error::InvalidConfig(format!(
            "derivative order {order} has dimension {} but the frame has d = {}",
            order.dim(),
            frame.dim()
        )));
    }
    Ok(())
}

/// Fourier coefficients of `Σ_{j,k} c_{j,k} ψ_{j,k}`.
pub fn synthesis_spectrum(frame: &NeedletFrame, coeffs: &CoefficientArray) -> Result<Spectrum> {
    coeffs.check_layout(frame)?;
    let top = coeffs.num_levels().saturating_sub(1);
    let mut spectrum = Spectrum::zeros(frame.dim(), frame.radius(top));
    for (lvl, c) in frame.levels().iter().zip(coeffs.levels()) {
        lvl.add_synthesis(c, &mut spectrum);
    }
    Ok(spectrum)
}

/// `Σ_{j,k} c_{j,k} ψ_{j,k}(θ)` at each point, using underived needlets.
pub fn synthesize(frame: &NeedletFrame, coeffs: &CoefficientArray, points: &[TorusPoint]) -> Result<Vec<f64>> {
    let spectrum = synthesis_spectrum(frame, coeffs)?;
    check_points(frame, points)?;
    par::map_slice(points, |p| spectrum.eval_at(p.angles()))
        .into_iter()
        .collect()
}

/// Like [`synthesize`] on the uniform grid with `grid` points per dimension.
pub fn synthesize_on_grid(frame: &NeedletFrame, coeffs: &CoefficientArray, grid: usize) -> Result<Vec<f64>> {
    synthesis_spectrum(frame, coeffs)?.eval_on_grid(grid)
}

/// Reference implementation of [`synthesize`] by explicit needlet sums.
pub fn synthesize_direct(frame: &NeedletFrame, coeffs: &CoefficientArray, points: &[TorusPoint]) -> Result<Vec<f64>> {
    synthesize_with_order(frame, coeffs, &MultiIndex::zero(frame.dim()), points)
}

/// `Σ_{j,k} c_{j,k} ψ^{(m)}_{j,k}(θ)` by explicit summation.
pub fn synthesize_with_order(
    frame: &NeedletFrame,
    coeffs: &CoefficientArray,
    order: &MultiIndex,
    points: &[TorusPoint],
) -> Result<Vec<f64>> {
    coeffs.check_layout(frame)?;
    check_order(frame, order)?;
    check_points(frame, points)?;
    par::map_slice(points, |p| {
        let mut terms = Vec::new();
        for (lvl, c) in frame.levels().iter().zip(coeffs.levels()) {
            for (k, &ck) in c.iter().enumerate() {
                if ck != 0.0 {
                    terms.push(ck * real_part(lvl.needlet_complex(k, p.angles(), order))?);
                }
            }
        }
        Ok(par::pairwise_sum(&terms))
    })
    .into_iter()
    .collect()
}

fn check_points(frame: &NeedletFrame, points: &[TorusPoint]) -> Result<()> {
    match points.iter().find(|p| p.dim() != frame.dim()) {
        Some(p) => Err(Error::InvalidConfig(format!(
            "point of dimension {} passed to a frame with d = {}",
            p.dim(),
            frame.dim()
        ))),
        None => Ok(()),
    }
}

/// Uniform grid with `grid` points per dimension, row-major.
pub fn uniform_grid(grid: usize, dim: usize) -> Vec<TorusPoint> {
    (0..grid.pow(dim as u32))
        .map(|i| {
            let mut p = vec![0.0; dim];
            grid_point(i, grid, &mut p);
            TorusPoint::new(p)
        })
        .collect()
}
