use std::f64::consts::TAU;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use torus_needlets::bench::{companion_path, DistanceMethod};
use torus_needlets::coeffs::format_sig17;
use torus_needlets::output::{write_all_atomic, FileWriter as Writer};
use torus_needlets::transform::uniform_grid;
use torus_needlets::{
    build_frame, emit_report, estimate as run_estimate, parse_density, run_experiment, truncation_level,
    CoefficientArray, Error, ExperimentConfig, MultiIndex, Provenance, ReportFormat, SampleSet, TestDensity,
    ThresholdKind, ThresholdRule,
};

use crate::{BenchArgs, EstimateArgs, EvalGridArgs, FormatArg, FrameInfoArgs, RuleArg};

impl From<RuleArg> for ThresholdKind {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Hard => ThresholdKind::Hard,
            RuleArg::Soft => ThresholdKind::Soft,
        }
    }
}

pub fn frame_info(args: FrameInfoArgs) -> Result<()> {
    let frame = build_frame(args.scale, args.d, args.jmax)?;
    let w = frame.window();
    println!("B = {}, d = {}, jmax = {}", args.scale, args.d, args.jmax);
    println!(
        "window moments: I0 = {:.10}, I1 = {:.10}, I2 = {:.10}",
        w.moment(0),
        w.moment(1),
        w.moment(2)
    );
    println!(
        "{:>3} {:>10} {:>12} {:>16} {:>14}",
        "j", "|Lambda_j|", "K_j", "lambda_jk", "||psi_jk||_2"
    );
    let zero = MultiIndex::zero(args.d);
    for lvl in frame.levels() {
        let grid = 4 * lvl.radius() as usize + 1;
        let norm = frame.needlet_lp_norm(lvl.level(), 0, &zero, 2.0, grid)?;
        println!(
            "{:>3} {:>10} {:>12} {:>16.10e} {:>14.10}",
            lvl.level(),
            lvl.shell().len(),
            lvl.len(),
            lvl.cubature().weight(),
            norm
        );
    }
    Ok(())
}

fn read_samples(path: &Path, dim: Option<usize>) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let samples = SampleSet::from_csv(file, dim).map_err(|e| e.with_context(path.display().to_string()))?;
    Ok(samples)
}

fn grid_writer<'a>(dim: usize, grid: usize, values: Vec<f64>, truth: Option<Vec<f64>>) -> Writer<'a> {
    Box::new(move |out: &mut dyn Write| {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("theta_{i}")).collect();
        header.push("value".into());
        if truth.is_some() {
            header.push("truth".into());
        }
        w.write_record(&header)?;
        for (i, p) in uniform_grid(grid, dim).iter().enumerate() {
            let mut row: Vec<String> = p.angles().iter().map(|&t| format_sig17(t)).collect();
            row.push(format_sig17(values[i]));
            if let Some(t) = &truth {
                row.push(format_sig17(t[i]));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<grid csv>", e))?;
        Ok(())
    })
}

fn truth_on_grid(density: &TestDensity, order: &MultiIndex, grid: usize) -> Vec<f64> {
    uniform_grid(grid, density.dim())
        .iter()
        .map(|p| density.derivative(p.angles(), order))
        .collect()
}

/// Estimates cannot represent constants; for `m = 0` the mean `1/(2π)^d`
/// of every density on `T^d` is added back.
fn mean_offset(order: &MultiIndex) -> f64 {
    if order.total() == 0 {
        TAU.powi(-(order.dim() as i32))
    } else {
        0.0
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let order = MultiIndex::parse(&args.m)?;
    if let Some(d) = args.d {
        if d != order.dim() {
            return Err(
                Error::InvalidConfig(format!("--m {} has {} components but --d is {d}", args.m, order.dim())).into(),
            );
        }
    }
    let samples = read_samples(&args.data, Some(args.d.unwrap_or(order.dim())))?;
    let n = samples.len();
    let dim = samples.dim();
    let truncation = match args.truncation {
        Some(j) => j,
        None => truncation_level(n, dim, order.total(), args.scale)?,
    };
    let frame = build_frame(args.scale, dim, truncation)?;
    let kind = ThresholdKind::from(args.rule);
    let rule = match (args.kappa, args.kappa0, args.sup_norm) {
        (Some(kappa), None, _) => {
            let rule = ThresholdRule::new(kind, kappa, order.clone(), n, args.scale)?;
            if args.literal_paper_kappa {
                rule.without_log_rate()
            } else {
                rule
            }
        }
        (None, Some(kappa0), Some(m)) => ThresholdRule::benchmark_schedule(
            kind,
            kappa0,
            m,
            frame.window(),
            order.clone(),
            n,
            args.literal_paper_kappa,
        )?,
        _ => return Err(Error::InvalidConfig("give either --kappa or --kappa0 with --M".into()).into()),
    };
    let density = args
        .density
        .as_deref()
        .map(|name| parse_density(name, dim))
        .transpose()?;
    let est = run_estimate(&frame, &samples, &order, &rule, Some(truncation))?;
    let grid = match args.grid {
        Some(g) => {
            let offset = mean_offset(&order);
            let values = est.eval_on_grid(g)?.into_iter().map(|v| v + offset).collect();
            let truth = density.as_ref().map(|d| truth_on_grid(d, &order, g));
            Some(grid_writer(dim, g, values, truth))
        }
        None => None,
    };
    let metadata = serde_json::to_string_pretty(&est.metadata())?;

    create_dir(&args.out)?;
    let coeff_path = args.out.join("coefficients.csv");
    let meta_path = args.out.join("metadata.json");
    let grid_path = args.out.join("grid.csv");
    let mut files: Vec<(&Path, Writer)> = vec![
        (&coeff_path, Box::new(|w: &mut dyn Write| est.write_csv(w))),
        (
            &meta_path,
            Box::new(|w: &mut dyn Write| writeln!(w, "{metadata}").map_err(|e| Error::io("metadata.json", e))),
        ),
    ];
    if let Some(g) = grid {
        files.push((&grid_path, g));
    }
    write_all_atomic(files)?;

    if samples.wrapped_count() > 0 {
        eprintln!(
            "warning: {} coordinate(s) were outside [0, 2pi) and were reduced",
            samples.wrapped_count()
        );
    }
    println!(
        "n = {n}, d = {dim}, m = {order}, J = {truncation}, rule = {kind}, kappa = {}",
        rule.kappa()
    );
    println!(
        "{:>3} {:>10} {:>8} {:>9} {:>14}",
        "j", "surviving", "total", "fraction", "tau"
    );
    for (c, tau) in est.surviving_counts().iter().zip(est.taus()) {
        println!(
            "{:>3} {:>10} {:>8} {:>9.4} {:>14.6e}",
            c.level, c.surviving, c.total, c.fraction, tau
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.literal_paper_kappa |= args.literal_paper_kappa;
    let report = run_experiment(&config)?;

    create_dir(&args.out)?;
    let stem = args
        .config
        .file_stem()
        .map_or_else(|| "report".to_string(), |s| s.to_string_lossy().into_owned());
    let csv_path: PathBuf = args.out.join(format!("{stem}.csv"));
    let json_path: PathBuf = args.out.join(format!("{stem}.json"));
    if matches!(args.format, FormatArg::Csv | FormatArg::Both) {
        emit_report(&report, ReportFormat::Csv, &csv_path)?;
    }
    if matches!(args.format, FormatArg::Json | FormatArg::Both) {
        emit_report(&report, ReportFormat::Json, &json_path)?;
    }

    println!(
        "{}: n = {}, m = {}, J = {}, M = {:.10}, replications = {}",
        config.density, config.n, config.m, report.truncation, report.sup_norm, config.replications
    );
    for &rule in &config.rules {
        println!("\nsurviving coefficients, {rule} rule (mean count and percentage)");
        print!("{:>3}", "j");
        for k in &config.kappa0 {
            print!(" {:>20}", format!("kappa0 = {k}"));
        }
        println!();
        for j in 0..report.truncation {
            print!("{j:>3}");
            for &k in &config.kappa0 {
                let agg = report
                    .count_aggregates
                    .iter()
                    .find(|a| a.rule == rule && a.kappa0 == k && a.level == j)
                    .context("missing aggregate")?;
                print!(
                    " {:>20}",
                    format!("{:.1} ({:.1}%)", agg.mean_surviving, 100.0 * agg.mean_fraction)
                );
            }
            println!();
        }
        for method in [DistanceMethod::Grid, DistanceMethod::Proxy] {
            let rows: Vec<_> = report
                .risk_aggregates
                .iter()
                .filter(|a| a.rule == rule && a.method == method)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let label = match method {
                DistanceMethod::Grid => "grid-quadrature",
                DistanceMethod::Proxy => "coefficient-proxy",
            };
            println!("{label} risk (mean +/- stderr)");
            for a in rows {
                println!(
                    "  kappa0 = {:<6} p = {:<4} {:.6} +/- {:.6}",
                    a.kappa0,
                    a.p.to_string(),
                    a.mean,
                    a.stderr
                );
            }
        }
    }
    if matches!(args.format, FormatArg::Csv | FormatArg::Both) {
        println!(
            "\nwrote {}, {}, {}",
            csv_path.display(),
            companion_path(&csv_path, "_risks").display(),
            companion_path(&csv_path, "_proxy_risks").display()
        );
    }
    if matches!(args.format, FormatArg::Json | FormatArg::Both) {
        println!("wrote {}", json_path.display());
    }
    Ok(())
}

pub fn eval_grid(args: EvalGridArgs) -> Result<()> {
    let order = MultiIndex::parse(&args.m)?;
    if order.dim() != args.d {
        return Err(Error::InvalidConfig(format!(
            "--m {} has {} components but --d is {}",
            args.m,
            order.dim(),
            args.d
        ))
        .into());
    }
    let text = std::fs::read_to_string(&args.coefficients).map_err(|e| Error::io(&args.coefficients, e))?;
    let header = text.lines().next().unwrap_or("");
    let column = if header.split(',').any(|h| h.trim() == "thresholded") {
        "thresholded"
    } else {
        "value"
    };
    let coeffs = CoefficientArray::read_csv_column(text.as_bytes(), order.clone(), Provenance::Thresholded, column)
        .map_err(|e| e.with_context(args.coefficients.display().to_string()))?;
    if coeffs.num_levels() == 0 {
        return Err(Error::InvalidConfig("coefficient table has no rows".into()).into());
    }
    let frame = build_frame(args.scale, args.d, coeffs.num_levels() - 1)?;
    let offset = mean_offset(&order);
    let values = torus_needlets::synthesize_on_grid(&frame, &coeffs, args.grid)?
        .into_iter()
        .map(|v| v + offset)
        .collect();
    let density = args
        .density
        .as_deref()
        .map(|name| parse_density(name, args.d))
        .transpose()?;
    let truth = density.as_ref().map(|d| truth_on_grid(d, &order, args.grid));
    write_all_atomic(vec![(&args.out, grid_writer(args.d, args.grid, values, truth))])?;
    println!("wrote {} ({} points)", args.out.display(), args.grid.pow(args.d as u32));
    Ok(())
}
