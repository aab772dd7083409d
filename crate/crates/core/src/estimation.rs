//! Empirical needlet coefficients and thresholded derivative estimators.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{format_sig17, CoefficientArray, Provenance};
use crate::error::{Error, Result};
use crate::frame::NeedletFrame;
use crate::harmonics::{basis_norm, reduce_angle, MultiIndex, TorusPoint};
use crate::par;
use crate::spectral::{real_part, Spectrum};
use crate::transform::{self, Strategy};
use crate::window::WindowFunction;

/// Samples accumulated per partial sum. Fixed so the reduction tree does not
/// depend on the number of threads.
const SAMPLE_CHUNK: usize = 512;

/// `n` observations on `T^d`, stored as a flat row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    coords: Vec<f64>,
    wrapped: usize,
}

impl SampleSet {
    /// Builds a sample set from flat coordinates, reducing every angle into
    /// `[0, 2π)`.
    pub fn from_flat(dim: usize, mut coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("sample dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptySample);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        let mut wrapped = 0;
        for (i, c) in coords.iter_mut().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite {
                    value: *c,
                    point: vec![(i / dim) as f64],
                });
            }
            let r = reduce_angle(*c);
            if r != *c {
                wrapped += 1;
            }
            *c = r;
        }
        Ok(SampleSet { dim, coords, wrapped })
    }

    pub fn from_points(points: &[TorusPoint]) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySample)?.dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidConfig("sample points have mixed dimensions".into()));
        }
        Self::from_flat(dim, points.iter().flat_map(|p| p.angles().iter().copied()).collect())
    }

    /// Reads headerless CSV rows of `d` angles in radians. With `dim = None`
    /// the dimension is taken from the first row.
    pub fn from_csv<R: Read>(input: R, dim: Option<usize>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut coords = Vec::new();
        let mut dim = dim;
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let d = *dim.get_or_insert(rec.len());
            if rec.len() != d {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} columns, found {}", rec.len()),
                });
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite angle {field:?}"),
                    });
                }
                coords.push(v);
            }
        }
        Self::from_flat(dim.unwrap_or(1), coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Number of coordinates that were outside `[0, 2π)` and got reduced.
    pub fn wrapped_count(&self) -> usize {
        self.wrapped
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Hard,
    Soft,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdKind::Hard => "hard",
            ThresholdKind::Soft => "soft",
        })
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(ThresholdKind::Hard),
            "soft" => Ok(ThresholdKind::Soft),
            _ => Err(Error::InvalidConfig(format!(
                "unknown threshold rule {s:?} (expected hard or soft)"
            ))),
        }
    }
}

/// Hard rule keeps `u` when `|u| >= a`; soft rule returns
/// `sign(u) max(|u| - a, 0)`.
pub fn apply_threshold(kind: ThresholdKind, u: f64, a: f64) -> f64 {
    match kind {
        ThresholdKind::Hard => {
            if u.abs() >= a {
                u
            } else {
                0.0
            }
        }
        ThresholdKind::Soft => u.signum() * (u.abs() - a).max(0.0),
    }
}

/// Level-dependent threshold `τ_j = κ B^{j|m|} sqrt(ln n / n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdRule {
    kind: ThresholdKind,
    kappa: f64,
    order: MultiIndex,
    n: usize,
    scale: f64,
    log_rate: bool,
}

impl ThresholdRule {
    pub fn new(kind: ThresholdKind, kappa: f64, order: MultiIndex, n: usize, scale: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be finite and >= 0, got {kappa}"
            )));
        }
        if !(scale.is_finite() && scale > 1.0) {
            return Err(Error::InvalidConfig(format!("scale B must satisfy B > 1, got {scale}")));
        }
        if n < 3 {
            return Err(Error::SampleTooSmall(n));
        }
        Ok(ThresholdRule {
            kind,
            kappa,
            order,
            n,
            scale,
            log_rate: true,
        })
    }

    /// The benchmark schedule `κ = κ₀ M I_{|m|}`, where `M` is the sup-norm
    /// of the density and `I_q` the window moment. With `literal` set, the
    /// `sqrt(ln n / n)` factor is dropped from every threshold.
    pub fn benchmark_schedule(
        kind: ThresholdKind,
        kappa0: f64,
        sup_norm: f64,
        window: &WindowFunction,
        order: MultiIndex,
        n: usize,
        literal: bool,
    ) -> Result<Self> {
        if !(sup_norm.is_finite() && sup_norm > 0.0) {
            return Err(Error::InvalidConfig(format!("M must be positive, got {sup_norm}")));
        }
        let kappa = kappa0 * sup_norm * window.moment(order.total());
        let mut rule = Self::new(kind, kappa, order, n, window.scale())?;
        rule.log_rate = !literal;
        Ok(rule)
    }

    pub fn kind(&self) -> ThresholdKind {
        self.kind
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn order(&self) -> &MultiIndex {
        &self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Whether thresholds carry the `sqrt(ln n / n)` factor.
    pub fn log_rate(&self) -> bool {
        self.log_rate
    }

    /// Drops the `sqrt(ln n / n)` factor from every threshold.
    pub fn without_log_rate(self) -> Self {
        ThresholdRule {
            log_rate: false,
            ..self
        }
    }

    pub fn with_kind(&self, kind: ThresholdKind) -> Self {
        ThresholdRule { kind, ..self.clone() }
    }

    pub fn threshold(&self, level: usize) -> f64 {
        let n = self.n as f64;
        let rate = if self.log_rate { (n.ln() / n).sqrt() } else { 1.0 };
        self.kappa * self.scale.powf(level as f64 * self.order.total() as f64) * rate
    }

    pub fn apply(&self, u: f64, level: usize) -> f64 {
        apply_threshold(self.kind, u, self.threshold(level))
    }
}

/// Free-function form of [`ThresholdRule::threshold`].
pub fn threshold_value(rule: &ThresholdRule, level: usize) -> f64 {
    rule.threshold(level)
}

/// `J = floor(log_B(n / ln n) / (d + 2|m|))`.
pub fn truncation_level(n: usize, dim: usize, order_total: u32, scale: f64) -> Result<usize> {
    if n < 3 {
        return Err(Error::SampleTooSmall(n));
    }
    if dim == 0 || scale.is_nan() || scale <= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "need d >= 1 and B > 1, got d = {dim}, B = {scale}"
        )));
    }
    let n = n as f64;
    let level = (n / n.ln()).ln() / scale.ln() / (dim as f64 + 2.0 * order_total as f64);
    Ok(level.floor() as usize)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Zone {
    Regular,
    /// Sparse zone for Besov integrability `r`.
    Sparse {
        r: f64,
    },
}

/// Oracle level `J_s` with `B^{J_s} ≈ (n / ln n)^{1/D}`, where
/// `D = 2(s + |m|) + d` in the regular zone and
/// `D = 2(s + |m| + d(1/2 - 1/r))` in the sparse zone.
pub fn diagnostic_bandwidth(s: f64, order_total: u32, dim: usize, scale: f64, n: usize, zone: Zone) -> Result<usize> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidConfig(format!("smoothness must be positive, got {s}")));
    }
    if n < 3 {
        return Err(Error::SampleTooSmall(n));
    }
    let m = order_total as f64;
    let d = dim as f64;
    let denom = match zone {
        Zone::Regular => 2.0 * (s + m) + d,
        Zone::Sparse { r } => {
            if r.is_nan() || r < 1.0 {
                return Err(Error::InvalidConfig(format!("integrability r must be >= 1, got {r}")));
            }
            2.0 * (s + m + d * (0.5 - 1.0 / r))
        }
    };
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "bandwidth exponent denominator {denom} is not positive"
        )));
    }
    let n = n as f64;
    Ok(((n / n.ln()).ln() / scale.ln() / denom).floor() as usize)
}

/// `â_ℓ = (1/n) Σᵢ conj(e_ℓ(Xᵢ))` for every `ℓ` with `max |ℓᵢ| <= radius`.
pub fn empirical_spectrum(samples: &SampleSet, radius: i64) -> Spectrum {
    let dim = samples.dim();
    let chunks = samples.len().div_ceil(SAMPLE_CHUNK);
    let partials = par::map_range(chunks, |c| {
        let lo = c * SAMPLE_CHUNK;
        let hi = (lo + SAMPLE_CHUNK).min(samples.len());
        let mut spec = Spectrum::zeros(dim, radius);
        let side = (2 * radius + 1) as usize;
        let mut tables = vec![Complex64::new(0.0, 0.0); dim * side];
        let data = spec.data_mut();
        for i in lo..hi {
            for (axis, &t) in samples.point(i).iter().enumerate() {
                for (s, slot) in tables[axis * side..(axis + 1) * side].iter_mut().enumerate() {
                    *slot = Complex64::from_polar(1.0, -((s as i64 - radius) as f64) * t);
                }
            }
            for (idx, slot) in data.iter_mut().enumerate() {
                let mut rest = idx;
                let mut phase = Complex64::new(1.0, 0.0);
                for axis in (0..dim).rev() {
                    phase *= tables[axis * side + rest % side];
                    rest /= side;
                }
                *slot += phase;
            }
        }
        spec
    });
    let mut total = Spectrum::zeros(dim, radius);
    for p in &partials {
        total.accumulate(p);
    }
    total.scale_by(basis_norm(dim) / samples.len() as f64);
    total
}

/// `β̂^{(m)}_{j,k} = ((-1)^{|m|} / n) Σᵢ ψ^{(m)}_{j,k}(Xᵢ)` for levels
/// `0..=jmax`.
pub fn empirical_coefficients(
    frame: &NeedletFrame,
    samples: &SampleSet,
    jmax: usize,
    order: &MultiIndex,
) -> Result<CoefficientArray> {
    empirical_coefficients_with(frame, samples, jmax, order, Strategy::Spectral)
}

/// [`empirical_coefficients`] with an explicit evaluation strategy.
/// [`Strategy::Direct`] evaluates every needlet at every sample.
pub fn empirical_coefficients_with(
    frame: &NeedletFrame,
    samples: &SampleSet,
    jmax: usize,
    order: &MultiIndex,
    strategy: Strategy,
) -> Result<CoefficientArray> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if jmax > frame.jmax() {
        return Err(Error::LevelOutOfRange {
            level: jmax,
            jmax: frame.jmax(),
        });
    }
    if samples.dim() != frame.dim() || order.dim() != frame.dim() {
        return Err(Error::InvalidConfig(format!(
            "frame has d = {}, samples d = {}, derivative order d = {}",
            frame.dim(),
            samples.dim(),
            order.dim()
        )));
    }
    let levels = match strategy {
        Strategy::Spectral => {
            let spectrum = empirical_spectrum(samples, frame.radius(jmax));
            transform::coefficients_from_spectrum(frame, &spectrum, order, jmax)?
        }
        Strategy::Direct => {
            let sign = order.sign() / samples.len() as f64;
            frame.levels()[..=jmax]
                .iter()
                .map(|lvl| {
                    par::map_range(lvl.len(), |k| {
                        let values = samples
                            .iter()
                            .map(|x| real_part(lvl.needlet_complex(k, x, order)))
                            .collect::<Result<Vec<f64>>>()?;
                        Ok(sign * par::pairwise_sum(&values))
                    })
                    .into_iter()
                    .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    CoefficientArray::new(order.clone(), levels, Provenance::Empirical)
}

/// A thresholded needlet estimator of `D^m f` over levels `0..J`.
#[derive(Clone, Debug)]
pub struct DerivativeEstimator<'a> {
    frame: &'a NeedletFrame,
    rule: ThresholdRule,
    truncation: usize,
    raw: CoefficientArray,
    thresholded: CoefficientArray,
    taus: Vec<f64>,
}

impl<'a> DerivativeEstimator<'a> {
    /// Thresholds precomputed empirical coefficients; levels `>= J` of `raw`
    /// are dropped.
    pub fn from_raw(
        frame: &'a NeedletFrame,
        raw: &CoefficientArray,
        rule: ThresholdRule,
        truncation: usize,
    ) -> Result<Self> {
        raw.check_layout(frame)?;
        if raw.num_levels() < truncation {
            return Err(Error::LevelMismatch(format!(
                "estimator needs {truncation} levels, only {} available",
                raw.num_levels()
            )));
        }
        if raw.order() != rule.order() {
            return Err(Error::InvalidConfig(format!(
                "coefficients are for order {} but the rule is for order {}",
                raw.order(),
                rule.order()
            )));
        }
        let raw = CoefficientArray::new(
            raw.order().clone(),
            raw.levels()[..truncation].to_vec(),
            Provenance::Empirical,
        )?;
        let taus: Vec<f64> = (0..truncation).map(|j| rule.threshold(j)).collect();
        let thresholded = raw.map(Provenance::Thresholded, |j, _, u| {
            apply_threshold(rule.kind, u, taus[j])
        });
        Ok(DerivativeEstimator {
            frame,
            rule,
            truncation,
            raw,
            thresholded,
            taus,
        })
    }

    pub fn frame(&self) -> &'a NeedletFrame {
        self.frame
    }

    pub fn rule(&self) -> &ThresholdRule {
        &self.rule
    }

    /// Number of estimated levels `J`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn raw(&self) -> &CoefficientArray {
        &self.raw
    }

    pub fn thresholded(&self) -> &CoefficientArray {
        &self.thresholded
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn eval(&self, points: &[TorusPoint]) -> Result<Vec<f64>> {
        transform::synthesize(self.frame, &self.thresholded, points)
    }

    pub fn eval_on_grid(&self, grid: usize) -> Result<Vec<f64>> {
        transform::synthesize_on_grid(self.frame, &self.thresholded, grid)
    }

    pub fn surviving_counts(&self) -> Vec<LevelCount> {
        surviving_counts(self)
    }

    /// Writes `j,k,raw,thresholded,tau` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "raw", "thresholded", "tau"])?;
        for ((j, k, raw), (_, _, thr)) in self.raw.iter().zip(self.thresholded.iter()) {
            w.write_record([
                j.to_string(),
                k.to_string(),
                format_sig17(raw),
                format_sig17(thr),
                format_sig17(self.taus[j]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn metadata(&self) -> EstimatorMetadata {
        EstimatorMetadata {
            scale: self.frame.scale(),
            dim: self.frame.dim(),
            order: self.rule.order.clone(),
            n: self.rule.n,
            kappa: self.rule.kappa,
            rule: self.rule.kind,
            truncation: self.truncation,
            log_rate: self.rule.log_rate,
        }
    }
}

/// Sidecar describing an estimator CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetadata {
    #[serde(rename = "B")]
    pub scale: f64,
    #[serde(rename = "d")]
    pub dim: usize,
    #[serde(rename = "m")]
    pub order: MultiIndex,
    pub n: usize,
    pub kappa: f64,
    pub rule: ThresholdKind,
    #[serde(rename = "J")]
    pub truncation: usize,
    /// False when thresholds omit the `sqrt(ln n / n)` factor.
    pub log_rate: bool,
}

/// Empirical coefficients for `j < J` followed by level-wise thresholding.
/// `J` is `truncation` when given, otherwise [`truncation_level`]; it must
/// not exceed the frame's `jmax`.
pub fn estimate<'a>(
    frame: &'a NeedletFrame,
    samples: &SampleSet,
    order: &MultiIndex,
    rule: &ThresholdRule,
    truncation: Option<usize>,
) -> Result<DerivativeEstimator<'a>> {
    if samples.len() != rule.n() {
        return Err(Error::InvalidConfig(format!(
            "rule was built for n = {} but the sample has n = {}",
            rule.n(),
            samples.len()
        )));
    }
    let j = match truncation {
        Some(j) => j,
        None => truncation_level(samples.len(), frame.dim(), order.total(), frame.scale())?,
    };
    if j > frame.jmax() {
        return Err(Error::FrameTooShallow {
            requested: j,
            jmax: frame.jmax(),
        });
    }
    let raw = if j == 0 {
        CoefficientArray::new(order.clone(), Vec::new(), Provenance::Empirical)?
    } else {
        empirical_coefficients(frame, samples, j - 1, order)?
    };
    DerivativeEstimator::from_raw(frame, &raw, rule.clone(), j)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: usize,
    pub surviving: usize,
    pub total: usize,
    pub fraction: f64,
}

/// Nonzero thresholded coefficients per level.
pub fn surviving_counts(estimator: &DerivativeEstimator<'_>) -> Vec<LevelCount> {
    estimator
        .thresholded
        .levels()
        .iter()
        .enumerate()
        .map(|(level, c)| {
            let surviving = c.iter().filter(|v| **v != 0.0).count();
            LevelCount {
                level,
                surviving,
                total: c.len(),
                fraction: surviving as f64 / c.len() as f64,
            }
        })
        .collect()
}
