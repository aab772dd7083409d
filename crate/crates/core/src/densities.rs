//! Test densities on `T^d` with closed-form derivatives and exact samplers.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::estimation::SampleSet;
use crate::harmonics::{reduce_angle, MultiIndex};
use crate::spectral::grid_point;

const SUP_SEARCH_GRID: usize = 4096;
const SUP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Uniform,
    WrappedNormal { sigma: f64, terms: u32, literal: bool },
    Product(Vec<TestDensity>),
}

/// A known probability density on `T^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDensity {
    dim: usize,
    kind: Kind,
    sup_norm: f64,
}

/// Uniform density `1/(2π)^d`.
pub fn uniform_density(dim: usize) -> Result<TestDensity> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    Ok(TestDensity {
        dim,
        kind: Kind::Uniform,
        sup_norm: TAU.powi(-(dim as i32)),
    })
}

/// Wrapped normal `(1/(σ√(2π))) Σ_{|k|<=terms} exp(-(θ + 2πk)² / (2σ²))`.
pub fn wrapped_normal(sigma: f64, terms: u32) -> Result<TestDensity> {
    build_wrapped_normal(sigma, terms, false)
}

/// The wrapped-normal series with the prefactor `1/(2π)` in place of
/// `1/(σ√(2π))`. It does not integrate to one; it exists to reproduce
/// published figures that use this normalization. Samples still follow the
/// wrapped normal law.
pub fn wrapped_normal_literal(sigma: f64, terms: u32) -> Result<TestDensity> {
    build_wrapped_normal(sigma, terms, true)
}

fn build_wrapped_normal(sigma: f64, terms: u32, literal: bool) -> Result<TestDensity> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "wrapped normal needs sigma > 0, got {sigma}"
        )));
    }
    if terms == 0 {
        return Err(Error::InvalidConfig(
            "wrapped normal needs at least one wrap term".into(),
        ));
    }
    let mut d = TestDensity {
        dim: 1,
        kind: Kind::WrappedNormal { sigma, terms, literal },
        sup_norm: 0.0,
    };
    d.sup_norm = locate_sup(|t| d.pdf(&[t]));
    Ok(d)
}

/// Product `f₁(θ₁) ⋯ f_d(θ_d)` of one-dimensional densities.
pub fn product_density(components: Vec<TestDensity>) -> Result<TestDensity> {
    if components.is_empty() {
        return Err(Error::InvalidConfig("product density needs at least one factor".into()));
    }
    if let Some(c) = components.iter().find(|c| c.dim != 1) {
        return Err(Error::InvalidConfig(format!(
            "product factors must be one-dimensional, got {c}"
        )));
    }
    Ok(TestDensity {
        dim: components.len(),
        sup_norm: components.iter().map(|c| c.sup_norm).product(),
        kind: Kind::Product(components),
    })
}

/// Max over `[0, 2π)` by grid search refined with golden-section search.
fn locate_sup(f: impl Fn(f64) -> f64) -> f64 {
    let h = TAU / SUP_SEARCH_GRID as f64;
    let best = (0..SUP_SEARCH_GRID)
        .map(|i| i as f64 * h)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(0.0);
    let (mut a, mut b) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    while b - a > SUP_TOL {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(best).max(f(0.5 * (a + b)))
}

/// Probabilists' Hermite polynomial `He_q(x)`.
fn hermite(q: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return prev;
    }
    for n in 1..q {
        let next = x * cur - n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl TestDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `M = sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_uniform(&self) -> bool {
        match &self.kind {
            Kind::Uniform => true,
            Kind::Product(c) => c.iter().all(TestDensity::is_uniform),
            Kind::WrappedNormal { .. } => false,
        }
    }

    pub fn pdf(&self, theta: &[f64]) -> f64 {
        self.derivative(theta, &MultiIndex::zero(self.dim))
    }

    /// `D^m f(θ)` for any order.
    pub fn derivative(&self, theta: &[f64], order: &MultiIndex) -> f64 {
        assert_eq!(theta.len(), self.dim, "dimension mismatch");
        assert_eq!(order.dim(), self.dim, "dimension mismatch");
        match &self.kind {
            Kind::Product(parts) => parts
                .iter()
                .zip(theta)
                .zip(order.orders())
                .map(|((p, &t), &q)| p.derivative_1d(t, q))
                .product(),
            _ => (0..self.dim)
                .map(|i| self.derivative_1d(theta[i], order.orders()[i]))
                .product(),
        }
    }

    fn derivative_1d(&self, t: f64, q: u32) -> f64 {
        match &self.kind {
            Kind::Uniform => {
                if q == 0 {
                    1.0 / TAU
                } else {
                    0.0
                }
            }
            &Kind::WrappedNormal { sigma, terms, literal } => {
                let norm = if literal {
                    1.0 / TAU
                } else {
                    1.0 / (sigma * (2.0 * PI).sqrt())
                };
                let t = reduce_angle(t);
                let terms = terms as i64;
                let scale = (-1.0 / sigma).powi(q as i32);
                let sum: f64 = (-terms..=terms)
                    .map(|k| {
                        let x = (t + TAU * k as f64) / sigma;
                        hermite(q, x) * (-0.5 * x * x).exp()
                    })
                    .sum();
                norm * scale * sum
            }
            Kind::Product(parts) => parts[0].derivative_1d(t, q),
        }
    }

    /// Draws one point into `out` (length `d`).
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            Kind::Uniform => out.iter_mut().for_each(|x| *x = rng.random_range(0.0..TAU)),
            &Kind::WrappedNormal { sigma, .. } => {
                let normal = Normal::new(0.0, sigma).expect("sigma validated at construction");
                out[0] = reduce_angle(normal.sample(rng));
            }
            Kind::Product(parts) => {
                for (p, x) in parts.iter().zip(out.iter_mut()) {
                    p.sample_point(rng, std::slice::from_mut(x));
                }
            }
        }
    }

    /// `n` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<SampleSet> {
        let mut coords = vec![0.0; n * self.dim];
        for chunk in coords.chunks_exact_mut(self.dim) {
            self.sample_point(rng, chunk);
        }
        SampleSet::from_flat(self.dim, coords)
    }

    /// Trapezoid-rule integral over `T^d` with `grid` points per dimension.
    pub fn quadrature_mass(&self, grid: usize) -> f64 {
        let mut p = vec![0.0; self.dim];
        let total: f64 = (0..grid.pow(self.dim as u32))
            .map(|i| {
                grid_point(i, grid, &mut p);
                self.pdf(&p)
            })
            .sum();
        total * (TAU / grid as f64).powi(self.dim as i32)
    }
}

impl fmt::Display for TestDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Uniform if self.dim == 1 => write!(f, "uniform"),
            Kind::Uniform => write!(f, "uniform(d={})", self.dim),
            Kind::WrappedNormal { sigma, terms, literal } => {
                write!(f, "wrapped_normal({sigma}")?;
                if *terms != 10 {
                    write!(f, ", {terms}")?;
                }
                if *literal {
                    write!(f, ", literal")?;
                }
                write!(f, ")")
            }
            Kind::Product(parts) => {
                let names: Vec<String> = parts.iter().map(ToString::to_string).collect();
                write!(f, "product({})", names.join(", "))
            }
        }
    }
}

/// Parses a density name:
///
/// * `uniform`: the uniform density in dimension `dim`
/// * `wrapped_normal`, `wrapped_normal(σ)`, `wrapped_normal(σ, terms)`, with
///   an optional trailing `literal` argument for the `1/(2π)` prefactor
/// * `product(a, b, ...)`: product of one-dimensional densities
pub fn parse_density(spec: &str, dim: usize) -> Result<TestDensity> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(Error::InvalidConfig(format!(
                    "unbalanced parentheses in density {spec:?}"
                )));
            }
            (spec[..open].trim(), Some(&spec[open + 1..spec.len() - 1]))
        }
        None => (spec, None),
    };
    let args: Vec<&str> = args.map(split_top_level).unwrap_or_default();
    let density = match name {
        "uniform" if args.is_empty() => uniform_density(dim)?,
        "wrapped_normal" => {
            let literal = args.last().is_some_and(|a| *a == "literal");
            let nums = &args[..args.len() - usize::from(literal)];
            if nums.len() > 2 {
                return Err(Error::InvalidConfig(format!("too many arguments in {spec:?}")));
            }
            let sigma = nums.first().map_or(Ok(1.0), |s| parse_num::<f64>(s, spec))?;
            let terms = nums.get(1).map_or(Ok(10), |s| parse_num::<u32>(s, spec))?;
            build_wrapped_normal(sigma, terms, literal)?
        }
        "product" => product_density(args.iter().map(|a| parse_density(a, 1)).collect::<Result<_>>()?)?,
        _ => return Err(Error::InvalidConfig(format!("unknown density {spec:?}"))),
    };
    if density.dim() != dim {
        return Err(Error::InvalidConfig(format!(
            "density {spec:?} has dimension {} but d = {dim} was requested",
            density.dim()
        )));
    }
    Ok(density)
}

fn parse_num<T: std::str::FromStr>(s: &str, spec: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad number {s:?} in density {spec:?}")))
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}
