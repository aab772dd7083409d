//! Seeded Monte Carlo risk experiments.
//!
//! Each replication draws a fresh sample from its own ChaCha stream
//! (`seed_from_u64(seed)` with stream number = replication index), computes
//! empirical coefficients once, and thresholds them for every `(κ₀, rule)`
//! pair. Results are assembled in `(replication, κ₀, rule, j)` order, so a
//! report depends only on the configuration, never on the thread count.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::coeffs::{format_sig17, CoefficientArray, Provenance};
use crate::densities::{parse_density, TestDensity};
use crate::error::{Error, Result};
use crate::estimation::{
    empirical_coefficients, truncation_level, DerivativeEstimator, LevelCount, ThresholdKind, ThresholdRule,
};
use crate::frame::{build_frame, grid_lp_norm, NeedletFrame};
use crate::harmonics::MultiIndex;
use crate::output::write_all_atomic;
use crate::par;
use crate::spectral::grid_point;
use crate::transform::{analyze, AnalysisOptions};

/// Risk exponent `p`, possibly infinite. Serialized as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(p) if p >= 1.0 && p.is_finite() => Ok(Exponent(p)),
            Repr::Word(w) if w == "inf" || w == "infinity" => Ok(Exponent::INFINITY),
            _ => Err(serde::de::Error::custom("expected a number >= 1 or \"inf\"")),
        }
    }
}

/// Explicit truncation level or the sample-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    Auto,
    Level(usize),
}

impl Serialize for Truncation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Truncation::Auto => s.serialize_str("auto"),
            Truncation::Level(j) => s.serialize_u64(*j as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Truncation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Level(usize),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Level(j) => Ok(Truncation::Level(j)),
            Repr::Word(w) if w == "auto" => Ok(Truncation::Auto),
            _ => Err(serde::de::Error::custom("expected a nonnegative integer or \"auto\"")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    GridQuadrature,
    CoefficientProxy,
    Both,
}

impl RiskMethod {
    fn grid(self) -> bool {
        matches!(self, RiskMethod::GridQuadrature | RiskMethod::Both)
    }

    fn proxy(self) -> bool {
        matches!(self, RiskMethod::CoefficientProxy | RiskMethod::Both)
    }
}

/// How a single distance is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    /// Trapezoid rule on the evaluation grid.
    Grid,
    /// `ℓ²` distance of needlet coefficients over the estimated levels.
    Proxy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub density: String,
    pub d: usize,
    #[serde(rename = "B")]
    pub scale: f64,
    pub m: MultiIndex,
    pub n: usize,
    pub replications: usize,
    pub kappa0: Vec<f64>,
    pub rules: Vec<ThresholdKind>,
    #[serde(rename = "J")]
    pub truncation: Truncation,
    pub grid: usize,
    pub p: Vec<Exponent>,
    pub seed: u64,
    pub risk_method: RiskMethod,
    pub literal_paper_kappa: bool,
}

const CONFIG_KEYS: [&str; 14] = [
    "density",
    "d",
    "B",
    "m",
    "n",
    "replications",
    "kappa0",
    "rules",
    "J",
    "grid",
    "p",
    "seed",
    "risk_method",
    "literal_paper_kappa",
];

fn field<T: DeserializeOwned>(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    problems: &mut Vec<String>,
) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            problems.push(format!("{key}: {e}"));
            None
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config, reporting every problem found.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(vec![format!("not valid JSON: {e}")]))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema(vec!["config must be a JSON object".into()]))?;
        let mut problems = Vec::new();
        for key in obj.keys().filter(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            problems.push(format!("unknown key {key:?}"));
        }
        for key in CONFIG_KEYS.iter().filter(|k| !obj.contains_key(**k)) {
            problems.push(format!("missing key {key:?}"));
        }
        let p = &mut problems;
        let density: Option<String> = field(obj, "density", p);
        let d: Option<usize> = field(obj, "d", p);
        let scale: Option<f64> = field(obj, "B", p);
        let m: Option<MultiIndex> = field(obj, "m", p);
        let n: Option<usize> = field(obj, "n", p);
        let replications: Option<usize> = field(obj, "replications", p);
        let kappa0: Option<Vec<f64>> = field(obj, "kappa0", p);
        let rules: Option<Vec<ThresholdKind>> = field(obj, "rules", p);
        let truncation: Option<Truncation> = field(obj, "J", p);
        let grid: Option<usize> = field(obj, "grid", p);
        let exps: Option<Vec<Exponent>> = field(obj, "p", p);
        let seed: Option<u64> = field(obj, "seed", p);
        let risk_method: Option<RiskMethod> = field(obj, "risk_method", p);
        let literal: Option<bool> = field(obj, "literal_paper_kappa", p);
        match (
            density,
            d,
            scale,
            m,
            n,
            replications,
            kappa0,
            rules,
            truncation,
            grid,
            exps,
            seed,
            risk_method,
            literal,
        ) {
            (
                Some(density),
                Some(d),
                Some(scale),
                Some(m),
                Some(n),
                Some(replications),
                Some(kappa0),
                Some(rules),
                Some(truncation),
                Some(grid),
                Some(p),
                Some(seed),
                Some(risk_method),
                Some(literal_paper_kappa),
            ) => {
                let config = ExperimentConfig {
                    density,
                    d,
                    scale,
                    m,
                    n,
                    replications,
                    kappa0,
                    rules,
                    truncation,
                    grid,
                    p,
                    seed,
                    risk_method,
                    literal_paper_kappa,
                };
                problems.extend(config.problems());
                if problems.is_empty() {
                    Ok(config)
                } else {
                    Err(Error::Schema(problems))
                }
            }
            (_, d, scale, _, n, replications, kappa0, rules, _, _, exps, ..) => {
                problems.extend(single_field_problems(
                    d,
                    scale,
                    n,
                    replications,
                    kappa0.as_deref(),
                    rules.as_deref(),
                    exps.as_deref(),
                ));
                Err(Error::Schema(problems))
            }
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Every semantic problem with the configuration.
    pub fn problems(&self) -> Vec<String> {
        let mut out = single_field_problems(
            Some(self.d),
            Some(self.scale),
            Some(self.n),
            Some(self.replications),
            Some(&self.kappa0),
            Some(&self.rules),
            Some(&self.p),
        );
        if self.m.dim() != self.d {
            out.push(format!("m has {} components but d = {}", self.m.dim(), self.d));
        }
        if self.risk_method == RiskMethod::CoefficientProxy && self.p.iter().any(|p| *p != Exponent::TWO) {
            out.push("the coefficient-proxy risk is only defined for p = 2".into());
        }
        if self.d > 0 {
            if let Err(e) = parse_density(&self.density, self.d) {
                out.push(e.to_string());
            }
        }
        if self.d > 0 && self.scale > 1.0 && self.n >= 3 && self.m.dim() == self.d {
            if let Ok(j) = self.resolved_truncation() {
                let need = 2 * self.scale.powi(j as i32 + 1).ceil() as usize + 1;
                if self.grid < need {
                    out.push(format!(
                        "grid must be at least {need} to resolve level J = {j}, got {}",
                        self.grid
                    ));
                }
            }
        }
        out
    }

    pub fn resolved_truncation(&self) -> Result<usize> {
        match self.truncation {
            Truncation::Level(j) => Ok(j),
            Truncation::Auto => truncation_level(self.n, self.d, self.m.total(), self.scale),
        }
    }
}

fn single_field_problems(
    d: Option<usize>,
    scale: Option<f64>,
    n: Option<usize>,
    replications: Option<usize>,
    kappa0: Option<&[f64]>,
    rules: Option<&[ThresholdKind]>,
    exps: Option<&[Exponent]>,
) -> Vec<String> {
    let mut out = Vec::new();
    if d == Some(0) {
        out.push("d must be at least 1".into());
    }
    if let Some(b) = scale.filter(|b| !(b.is_finite() && *b > 1.0)) {
        out.push(format!("B must satisfy B > 1, got {b}"));
    }
    if let Some(n) = n.filter(|n| *n < 3) {
        out.push(format!("n must be at least 3, got {n}"));
    }
    if replications == Some(0) {
        out.push("replications must be at least 1".into());
    }
    if let Some(kappa0) = kappa0 {
        if kappa0.is_empty() {
            out.push("kappa0 must list at least one value".into());
        }
        for k in kappa0.iter().filter(|k| !(k.is_finite() && **k > 0.0)) {
            out.push(format!("kappa0 values must be positive, got {k}"));
        }
    }
    if rules.is_some_and(<[_]>::is_empty) {
        out.push("rules must list at least one of \"hard\", \"soft\"".into());
    }
    if exps.is_some_and(<[_]>::is_empty) {
        out.push("p must list at least one exponent".into());
    }
    out
}

/// Per-replication seed stream: the RNG for replication `r` is the ChaCha
/// generator seeded with the master seed, switched to stream `r`.
pub fn replication_rng(master: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replication as u64);
    rng
}

/// Compares estimators against a known density.
pub struct RiskEvaluator<'a> {
    frame: &'a NeedletFrame,
    grid: usize,
    truth: Vec<f64>,
    offset: f64,
    truth_coeffs: CoefficientArray,
}

impl<'a> RiskEvaluator<'a> {
    /// Tabulates `D^m f` on the evaluation grid and its needlet coefficients
    /// on levels `0..truncation`. For `m = 0` the known mean of `f` is added
    /// back to estimates, which cannot represent constants.
    pub fn new(
        frame: &'a NeedletFrame,
        density: &TestDensity,
        order: &MultiIndex,
        truncation: usize,
        grid: usize,
    ) -> Result<Self> {
        let dim = frame.dim();
        if density.dim() != dim || order.dim() != dim {
            return Err(Error::InvalidConfig(
                "density, order and frame dimensions differ".into(),
            ));
        }
        if truncation > frame.jmax() + 1 {
            return Err(Error::FrameTooShallow {
                requested: truncation,
                jmax: frame.jmax(),
            });
        }
        let truth = par::map_range(grid.pow(dim as u32), |i| {
            let mut p = vec![0.0; dim];
            grid_point(i, grid, &mut p);
            density.derivative(&p, order)
        });
        let offset = if order.total() == 0 {
            truth.iter().sum::<f64>() / truth.len() as f64
        } else {
            0.0
        };
        let truth_coeffs = if truncation == 0 {
            CoefficientArray::new(order.clone(), Vec::new(), Provenance::ExactQuadrature)?
        } else {
            analyze(
                frame,
                &|t| density.pdf(t),
                order,
                truncation - 1,
                AnalysisOptions::default(),
            )?
        };
        Ok(RiskEvaluator {
            frame,
            grid,
            truth,
            offset,
            truth_coeffs,
        })
    }

    /// True derivative values on the evaluation grid.
    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    /// Needlet coefficients `β^{(m)}` of the true density.
    pub fn truth_coefficients(&self) -> &CoefficientArray {
        &self.truth_coeffs
    }

    /// `‖f̂^{(m)} - f^{(m)}‖_{L^p}` by the trapezoid rule.
    pub fn grid_distance(&self, estimator: &DerivativeEstimator<'_>, p: f64) -> Result<f64> {
        self.check(estimator)?;
        let est = estimator.eval_on_grid(self.grid)?;
        let diff: Vec<f64> = est.iter().zip(&self.truth).map(|(e, t)| e + self.offset - t).collect();
        Ok(grid_lp_norm(&diff, p, self.frame.dim()))
    }

    /// `sqrt(Σ_{j<J, k} (c_{j,k} - β^{(m)}_{j,k})²)`.
    pub fn proxy_distance(&self, estimator: &DerivativeEstimator<'_>) -> Result<f64> {
        self.check(estimator)?;
        let c = estimator.thresholded();
        if c.num_levels() > self.truth_coeffs.num_levels() {
            return Err(Error::LevelMismatch(format!(
                "estimator has {} levels, truth was tabulated for {}",
                c.num_levels(),
                self.truth_coeffs.num_levels()
            )));
        }
        let sq: f64 = c
            .iter()
            .map(|(j, k, v)| {
                let d = v - self.truth_coeffs.level(j)[k];
                d * d
            })
            .sum();
        Ok(sq.sqrt())
    }

    fn check(&self, estimator: &DerivativeEstimator<'_>) -> Result<()> {
        let f = estimator.frame();
        if f.scale() != self.frame.scale() || f.dim() != self.frame.dim() {
            return Err(Error::InvalidConfig("estimator was built on a different frame".into()));
        }
        Ok(())
    }
}

/// One-off distance between an estimator and the true derivative.
pub fn lp_distance(
    estimator: &DerivativeEstimator<'_>,
    truth: &TestDensity,
    p: f64,
    grid: usize,
    method: DistanceMethod,
) -> Result<f64> {
    if method == DistanceMethod::Proxy && p != 2.0 {
        return Err(Error::InvalidConfig(format!(
            "the coefficient proxy is only defined for p = 2, got {p}"
        )));
    }
    let eval = RiskEvaluator::new(
        estimator.frame(),
        truth,
        estimator.rule().order(),
        estimator.truncation(),
        grid,
    )?;
    match method {
        DistanceMethod::Grid => eval.grid_distance(estimator, p),
        DistanceMethod::Proxy => eval.proxy_distance(estimator),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub method: DistanceMethod,
    pub p: Exponent,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// ChaCha stream number used for this replication's sample.
    pub stream: u64,
    pub kappa0: f64,
    pub rule: ThresholdKind,
    pub counts: Vec<LevelCount>,
    pub risks: Vec<RiskValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskAggregate {
    pub kappa0: f64,
    pub rule: ThresholdKind,
    pub method: DistanceMethod,
    pub p: Exponent,
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountAggregate {
    pub kappa0: f64,
    pub rule: ThresholdKind,
    pub level: usize,
    pub total: usize,
    pub mean_surviving: f64,
    pub mean_fraction: f64,
    /// Replications in which no coefficient of this level survived.
    pub zero_replications: usize,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    #[serde(rename = "J")]
    pub truncation: usize,
    #[serde(rename = "M")]
    pub sup_norm: f64,
    pub records: Vec<ReplicationRecord>,
    pub risk_aggregates: Vec<RiskAggregate>,
    pub count_aggregates: Vec<CountAggregate>,
}

/// Mean and standard error (sample standard deviation over `sqrt(R)`),
/// summed in input order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    if r == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    if r == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

impl RiskReport {
    /// Builds a report from per-replication records, computing aggregates.
    pub fn assemble(
        config: ExperimentConfig,
        truncation: usize,
        sup_norm: f64,
        records: Vec<ReplicationRecord>,
    ) -> Self {
        let mut report = RiskReport {
            config,
            truncation,
            sup_norm,
            records,
            risk_aggregates: Vec::new(),
            count_aggregates: Vec::new(),
        };
        let (risks, counts) = report.recompute_aggregates();
        report.risk_aggregates = risks;
        report.count_aggregates = counts;
        report
    }

    /// Aggregates over replications, grouped by `(κ₀, rule)` in config order.
    pub fn recompute_aggregates(&self) -> (Vec<RiskAggregate>, Vec<CountAggregate>) {
        let mut risks = Vec::new();
        let mut counts = Vec::new();
        for &kappa0 in &self.config.kappa0 {
            for &rule in &self.config.rules {
                let group: Vec<&ReplicationRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.kappa0 == kappa0 && r.rule == rule)
                    .collect();
                let Some(first) = group.first() else { continue };
                for (i, rv) in first.risks.iter().enumerate() {
                    let values: Vec<f64> = group.iter().map(|r| r.risks[i].value).collect();
                    let (mean, stderr) = mean_stderr(&values);
                    risks.push(RiskAggregate {
                        kappa0,
                        rule,
                        method: rv.method,
                        p: rv.p,
                        mean,
                        stderr,
                        replications: values.len(),
                    });
                }
                for (j, lc) in first.counts.iter().enumerate() {
                    let surv: Vec<f64> = group.iter().map(|r| r.counts[j].surviving as f64).collect();
                    let frac: Vec<f64> = group.iter().map(|r| r.counts[j].fraction).collect();
                    counts.push(CountAggregate {
                        kappa0,
                        rule,
                        level: lc.level,
                        total: lc.total,
                        mean_surviving: mean_stderr(&surv).0,
                        mean_fraction: mean_stderr(&frac).0,
                        zero_replications: group.iter().filter(|r| r.counts[j].surviving == 0).count(),
                        replications: group.len(),
                    });
                }
            }
        }
        (risks, counts)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes the surviving-count table (`density,n,m,rule,kappa0,replication,j,surviving,total,fraction`).
    pub fn write_counts_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "density",
            "n",
            "m",
            "rule",
            "kappa0",
            "replication",
            "j",
            "surviving",
            "total",
            "fraction",
        ])?;
        for r in &self.records {
            for c in &r.counts {
                w.write_record([
                    self.config.density.clone(),
                    self.config.n.to_string(),
                    self.config.m.to_string(),
                    r.rule.to_string(),
                    r.kappa0.to_string(),
                    r.replication.to_string(),
                    c.level.to_string(),
                    c.surviving.to_string(),
                    c.total.to_string(),
                    c.fraction.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes risks of one method (`density,n,m,rule,kappa0,replication,p,risk`).
    pub fn write_risks_csv(&self, method: DistanceMethod, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["density", "n", "m", "rule", "kappa0", "replication", "p", "risk"])?;
        for r in &self.records {
            for v in r.risks.iter().filter(|v| v.method == method) {
                w.write_record([
                    self.config.density.clone(),
                    self.config.n.to_string(),
                    self.config.m.to_string(),
                    r.rule.to_string(),
                    r.kappa0.to_string(),
                    r.replication.to_string(),
                    v.p.to_string(),
                    format_sig17(v.value),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Runs every replication of `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RiskReport> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::Schema(problems));
    }
    let density = parse_density(&config.density, config.d)?;
    let truncation = config.resolved_truncation()?;
    let frame = build_frame(config.scale, config.d, truncation)?;
    let evaluator = RiskEvaluator::new(&frame, &density, &config.m, truncation, config.grid)?;
    let mut rules = Vec::new();
    for &kappa0 in &config.kappa0 {
        for &kind in &config.rules {
            let rule = ThresholdRule::benchmark_schedule(
                kind,
                kappa0,
                density.sup_norm(),
                frame.window(),
                config.m.clone(),
                config.n,
                config.literal_paper_kappa,
            )?;
            rules.push((kappa0, rule));
        }
    }
    let per_replication = par::map_range(config.replications, |r| {
        run_replication(config, &frame, &density, &evaluator, &rules, truncation, r)
    });
    let mut records = Vec::with_capacity(config.replications * rules.len());
    for batch in per_replication {
        records.extend(batch?);
    }
    Ok(RiskReport::assemble(
        config.clone(),
        truncation,
        density.sup_norm(),
        records,
    ))
}

fn run_replication(
    config: &ExperimentConfig,
    frame: &NeedletFrame,
    density: &TestDensity,
    evaluator: &RiskEvaluator<'_>,
    rules: &[(f64, ThresholdRule)],
    truncation: usize,
    replication: usize,
) -> Result<Vec<ReplicationRecord>> {
    let mut rng = replication_rng(config.seed, replication);
    let samples = density.sample(&mut rng, config.n)?;
    let raw = if truncation == 0 {
        CoefficientArray::new(config.m.clone(), Vec::new(), Provenance::Empirical)?
    } else {
        empirical_coefficients(frame, &samples, truncation - 1, &config.m)
            .map_err(|e| e.with_context(format!("replication {replication}")))?
    };
    rules
        .iter()
        .map(|(kappa0, rule)| {
            let context = || format!("kappa0 = {kappa0}, rule = {}, replication = {replication}", rule.kind());
            let est = DerivativeEstimator::from_raw(frame, &raw, rule.clone(), truncation)
                .map_err(|e| e.with_context(context()))?;
            let mut risks = Vec::new();
            if config.risk_method.grid() {
                for &p in &config.p {
                    let value = evaluator
                        .grid_distance(&est, p.0)
                        .map_err(|e| e.with_context(context()))?;
                    risks.push(RiskValue {
                        method: DistanceMethod::Grid,
                        p,
                        value,
                    });
                }
            }
            if config.risk_method.proxy() {
                risks.push(RiskValue {
                    method: DistanceMethod::Proxy,
                    p: Exponent::TWO,
                    value: evaluator.proxy_distance(&est).map_err(|e| e.with_context(context()))?,
                });
            }
            Ok(ReplicationRecord {
                replication,
                stream: replication as u64,
                kappa0: *kappa0,
                rule: rule.kind(),
                counts: est.surviving_counts(),
                risks,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Companion path `{stem}{suffix}.csv` next to `path`.
pub fn companion_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.csv"))
}

/// Writes a report. CSV output goes to `destination` (counts) plus
/// `{stem}_risks.csv` (grid-quadrature risks) and `{stem}_proxy_risks.csv`
/// (coefficient-proxy risks); JSON output is a single document embedding the
/// config. Nothing is written unless every file can be produced.
pub fn emit_report(report: &RiskReport, format: ReportFormat, destination: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let text = report.to_json_string()?;
            write_all_atomic(vec![(
                destination,
                Box::new(move |w: &mut dyn Write| {
                    w.write_all(text.as_bytes())
                        .and_then(|_| w.write_all(b"\n"))
                        .map_err(|e| Error::io(destination, e))
                }),
            )])
        }
        ReportFormat::Csv => {
            let risks = companion_path(destination, "_risks");
            let proxy = companion_path(destination, "_proxy_risks");
            write_all_atomic(vec![
                (destination, Box::new(|w: &mut dyn Write| report.write_counts_csv(w))),
                (
                    &risks,
                    Box::new(|w: &mut dyn Write| report.write_risks_csv(DistanceMethod::Grid, w)),
                ),
                (
                    &proxy,
                    Box::new(|w: &mut dyn Write| report.write_risks_csv(DistanceMethod::Proxy, w)),
                ),
            ])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_json(replications: usize) -> String {
        format!(
            r#"{{"density": "uniform", "d": 1, "B": 2, "m": [1], "n": 8000, "replications": {replications},
                "kappa0": [0.5, 1, 2.5, 5], "rules": ["hard"], "J": 4, "grid": 256, "p": [2],
                "seed": 20240601, "risk_method": "both", "literal_paper_kappa": false}}"#
        )
    }

    #[test]
    fn config_parses_and_validates() {
        let c = ExperimentConfig::from_json_str(&table1_json(3)).unwrap();
        assert_eq!(c.truncation, Truncation::Level(4));
        assert_eq!(c.p, vec![Exponent::TWO]);
    }

    #[test]
    fn config_errors_are_collected() {
        let text = r#"{"density": "uniform", "d": 1, "B": 1, "m": [1, 0], "n": 8000, "replications": 0,
            "kappa0": [0.5], "rules": ["hard"], "J": "auto", "grid": 8, "p": [2, "inf"], "seed": 1,
            "risk_method": "coefficient-proxy", "literal_paper_kappa": false, "colour": "blue"}"#;
        let Err(Error::Schema(problems)) = ExperimentConfig::from_json_str(text) else {
            panic!("expected schema error")
        };
        let joined = problems.join("\n");
        for needle in ["colour", "B must", "m has 2", "replications", "proxy"] {
            assert!(joined.contains(needle), "{needle} missing from {joined}");
        }
    }

    #[test]
    fn missing_and_mistyped_keys_are_reported() {
        let text = r#"{"density": "uniform", "d": "one"}"#;
        let Err(Error::Schema(problems)) = ExperimentConfig::from_json_str(text) else {
            panic!()
        };
        assert!(problems.iter().any(|p| p.starts_with("d:")));
        assert!(problems.iter().any(|p| p.contains("missing key \"seed\"")));
    }

    #[test]
    fn exponents_roundtrip() {
        let v: Vec<Exponent> = serde_json::from_str(r#"[1, 2.5, "inf"]"#).unwrap();
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.0,2.5,"inf"]"#);
        assert!(serde_json::from_str::<Exponent>("0.5").is_err());
    }

    #[test]
    fn streams_are_independent_of_replication_count() {
        use rand::Rng;
        let a: u64 = replication_rng(5, 3).random();
        let b: u64 = replication_rng(5, 3).random();
        let c: u64 = replication_rng(5, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[]), (0.0, 0.0));
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let c = ExperimentConfig::from_json_str(&table1_json(1)).unwrap();
        let r = RiskReport::assemble(c, 4, 0.1, Vec::new());
        let mut buf = Vec::new();
        r.write_counts_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "density,n,m,rule,kappa0,replication,j,surviving,total,fraction\n"
        );
        let mut buf = Vec::new();
        r.write_risks_csv(DistanceMethod::Grid, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "density,n,m,rule,kappa0,replication,p,risk\n"
        );
    }

    #[test]
    fn companion_paths() {
        let p = Path::new("/tmp/out/table1.csv");
        assert_eq!(companion_path(p, "_risks"), Path::new("/tmp/out/table1_risks.csv"));
    }
}
