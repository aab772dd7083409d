use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Toroidal needlet frames and thresholded density-derivative estimators.
#[derive(Parser, Debug)]
#[command(name = "needlets", version, about)]
struct Cli {
    /// Cap on worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print per-level shell sizes, cubature sizes, weights and norms.
    FrameInfo(FrameInfoArgs),
    /// Estimate a density derivative from a sample file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo risk experiment described by a JSON config.
    Bench(BenchArgs),
    /// Evaluate a stored coefficient table on a uniform grid.
    EvalGrid(EvalGridArgs),
}

#[derive(Args, Debug)]
struct FrameInfoArgs {
    /// Dilation factor B > 1.
    #[arg(long = "B", default_value_t = 2.0)]
    scale: f64,
    /// Torus dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Highest level to build.
    #[arg(long, default_value_t = 4)]
    jmax: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Hard,
    Soft,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("threshold").required(true).args(["kappa", "kappa0"])))]
struct EstimateArgs {
    /// Sample file: CSV without header, one point per line, d angles in radians.
    data: PathBuf,
    /// Derivative order as a comma-separated multi-index, e.g. `1` or `1,0`.
    #[arg(long, default_value = "1")]
    m: String,
    #[arg(long, value_enum, default_value_t = RuleArg::Hard)]
    rule: RuleArg,
    /// Threshold constant κ in τ_j = κ B^{j|m|} sqrt(ln n / n).
    #[arg(long)]
    kappa: Option<f64>,
    /// Benchmark schedule κ = κ₀ M I_{|m|}; needs --M.
    #[arg(long, requires = "sup_norm")]
    kappa0: Option<f64>,
    /// Sup-norm of the density (or an upper estimate of it).
    #[arg(long = "M")]
    sup_norm: Option<f64>,
    /// Number of estimated levels; defaults to floor(log_B(n / ln n) / (d + 2|m|)).
    #[arg(long = "J")]
    truncation: Option<usize>,
    #[arg(long = "B", default_value_t = 2.0)]
    scale: f64,
    /// Dimension; inferred from the data when omitted.
    #[arg(long)]
    d: Option<usize>,
    /// Also evaluate the estimator on a grid with this many points per dimension.
    #[arg(long)]
    grid: Option<usize>,
    /// Named test density whose true derivative is added to the grid output.
    #[arg(long)]
    density: Option<String>,
    /// Drop the sqrt(ln n / n) factor from the thresholds.
    #[arg(long)]
    literal_paper_kappa: bool,
    /// Output directory (created if needed).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory (created if needed).
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Force the literal threshold schedule without sqrt(ln n / n).
    #[arg(long)]
    literal_paper_kappa: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct EvalGridArgs {
    /// Coefficient table with columns j,k and value (or thresholded).
    coefficients: PathBuf,
    #[arg(long = "B", default_value_t = 2.0)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Derivative order the coefficients belong to.
    #[arg(long, default_value = "0")]
    m: String,
    /// Points per dimension.
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Named test density whose true derivative is added as a column.
    #[arg(long)]
    density: Option<String>,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let validation = err
                .downcast_ref::<torus_needlets::Error>()
                .is_some_and(torus_needlets::Error::is_validation);
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let work = move || match cli.command {
        Command::FrameInfo(a) => commands::frame_info(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Bench(a) => commands::bench(a),
        Command::EvalGrid(a) => commands::eval_grid(a),
    };
    match cli.threads {
        Some(0) => Err(torus_needlets::Error::InvalidConfig("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    }
}
