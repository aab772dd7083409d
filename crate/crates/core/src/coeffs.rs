use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::NeedletFrame;
use crate::harmonics::MultiIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactQuadrature,
    Empirical,
    Thresholded,
}

/// Real needlet coefficients `c_{j,k}` for levels `0..levels()`, with `k`
/// zero-based within each level.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientArray {
    order: MultiIndex,
    levels: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl CoefficientArray {
    pub fn new(order: MultiIndex, levels: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if let Some((j, k, v)) = levels
            .iter()
            .enumerate()
            .flat_map(|(j, l)| l.iter().enumerate().map(move |(k, v)| (j, k, *v)))
            .find(|(_, _, v)| !v.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "coefficient ({j}, {k}) is not finite: {v}"
            )));
        }
        Ok(CoefficientArray {
            order,
            levels,
            provenance,
        })
    }

    /// All-zero coefficients shaped like levels `0..count` of `frame`.
    pub fn zeros(frame: &NeedletFrame, count: usize, order: MultiIndex) -> Self {
        let levels = frame.levels()[..count.min(frame.levels().len())]
            .iter()
            .map(|l| vec![0.0; l.len()])
            .collect();
        CoefficientArray {
            order,
            levels,
            provenance: Provenance::ExactQuadrature,
        }
    }

    pub fn order(&self) -> &MultiIndex {
        &self.order
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of stored levels (levels `0..n`).
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// `(j, k, value)` in level-then-index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(j, l)| l.iter().enumerate().map(move |(k, &v)| (j, k, v)))
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ_{j,k} c²`.
    pub fn energy(&self) -> f64 {
        self.levels.iter().flatten().map(|v| v * v).sum()
    }

    pub fn map(&self, provenance: Provenance, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(j, l)| l.iter().enumerate().map(|(k, &v)| f(j, k, v)).collect())
            .collect();
        CoefficientArray {
            order: self.order.clone(),
            levels,
            provenance,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(self.provenance, |_, _, v| v * factor)
    }

    /// Errors unless every stored level has the frame's `K_j`.
    pub fn check_layout(&self, frame: &NeedletFrame) -> Result<()> {
        if self.levels.len() > frame.levels().len() {
            return Err(Error::LevelMismatch(format!(
                "{} levels stored but the frame stops at jmax = {}",
                self.levels.len(),
                frame.jmax()
            )));
        }
        if self.order.dim() != frame.dim() {
            return Err(Error::LevelMismatch(format!(
                "derivative order has dimension {} but the frame has d = {}",
                self.order.dim(),
                frame.dim()
            )));
        }
        for (j, (l, fl)) in self.levels.iter().zip(frame.levels()).enumerate() {
            if l.len() != fl.len() {
                return Err(Error::LevelMismatch(format!(
                    "level {j} has {} coefficients, frame expects {}",
                    l.len(),
                    fl.len()
                )));
            }
        }
        Ok(())
    }

    /// Writes `j,k,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "value"])?;
        for (j, k, v) in self.iter() {
            w.write_record([j.to_string(), k.to_string(), format_sig17(v)])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a `j,k,value` table; levels must be contiguous from 0 and `k`
    /// contiguous within each level.
    pub fn read_csv<R: Read>(input: R, order: MultiIndex, provenance: Provenance) -> Result<Self> {
        Self::read_csv_column(input, order, provenance, "value")
    }

    /// Like [`read_csv`](Self::read_csv) but takes the values from `column`.
    pub fn read_csv_column<R: Read>(input: R, order: MultiIndex, provenance: Provenance, column: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column {name:?}"),
            })
        };
        let (cj, ck, cv) = (find("j")?, find("k")?, find(column)?);
        let mut levels: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("").trim();
            let parse_err = |what: &str| Error::Parse {
                line,
                message: format!("bad {what}"),
            };
            let j: usize = field(cj).parse().map_err(|_| parse_err("j"))?;
            let k: usize = field(ck).parse().map_err(|_| parse_err("k"))?;
            let v: f64 = field(cv).parse().map_err(|_| parse_err(column))?;
            if j == levels.len() {
                levels.push(Vec::new());
            }
            if j + 1 != levels.len() || k != levels[j].len() {
                return Err(Error::Parse {
                    line,
                    message: format!("unexpected (j, k) = ({j}, {k}); rows must be sorted and contiguous"),
                });
            }
            levels[j].push(v);
        }
        Self::new(order, levels, provenance)
    }

    /// Besov sequence norm
    /// `‖ (B^{j(s + d(1/2 - 1/r))} ‖c_{j,·}‖_{ℓ^r})_j ‖_{ℓ^q}`; `r` or `q`
    /// may be `f64::INFINITY`.
    pub fn besov_sequence_norm(&self, s: f64, r: f64, q: f64, scale: f64, dim: usize) -> f64 {
        let exponent = s + dim as f64 * (0.5 - 1.0 / r);
        let per_level: Vec<f64> = self
            .levels
            .iter()
            .enumerate()
            .map(|(j, l)| scale.powf(j as f64 * exponent) * lp_seq(l.iter().copied(), r))
            .collect();
        lp_seq(per_level.into_iter(), q)
    }
}

fn lp_seq(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else {
        values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Free-function form of [`CoefficientArray::besov_sequence_norm`].
pub fn besov_sequence_norm(coeffs: &CoefficientArray, s: f64, r: f64, q: f64, scale: f64, dim: usize) -> f64 {
    coeffs.besov_sequence_norm(s, r, q, scale, dim)
}

/// Decimal scientific notation with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}
