//! `spuds` command-line tool.
//!
//! Exit codes: 0 on success, 2 when clustering finished with a warning,
//! 1 on any error.

mod record;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spuds::asymptotics::{convergence_study, DensityModel, HalfspaceSurface, Statistic, StudyConfig};
use spuds::dataset::load_label_file;
use spuds::metrics::nmi;
use spuds::{load_csv, spuds_cluster};

use record::{ClusterSettings, Outcome, Resolved, RunRecord, Timings};

#[derive(Parser)]
#[command(name = "spuds", version, about = "Spectral clustering with density-separation model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV dataset and emit a JSON run record.
    Cluster(ClusterArgs),
    /// Normalized mutual information between two label files.
    Nmi(NmiArgs),
    /// Monte Carlo convergence study of a scaled cut statistic.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Args)]
struct ClusterArgs {
    /// Comma-separated numeric data, one row per point.
    #[arg(long, required_unless_present = "config")]
    input: Option<PathBuf>,
    /// 0-based column holding class labels; excluded from the features.
    #[arg(long)]
    label_column: Option<usize>,
    #[arg(long)]
    has_header: bool,
    /// Fixed kernel bandwidth instead of the data-driven rule.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    c0: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Clusters smaller than ceil(n * gamma_frac) are outliers.
    #[arg(long)]
    gamma_frac: Option<f64>,
    /// Increment while the cluster count is ascending.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    c_max: Option<usize>,
    #[arg(long)]
    segment_grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cluster a uniform sample of this many rows, drawn with `--seed`.
    #[arg(long)]
    subsample: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Reuse the settings of an earlier run record (or a bare settings
    /// object); explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the final labels, one per line.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct NmiArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// One of gauss1d, gauss2d, mixture1d, uniform1d.
    #[arg(long)]
    model: String,
    /// Distance between the two mixture1d component means.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Position of the hyperplane along the first axis.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    surface_offset: f64,
    /// One of volume, total_volume, cut, ncut, ratio_cut.
    #[arg(long)]
    statistic: String,
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Bandwidth exponent in sigma = n^(-alpha); defaults to 1/(2d+3).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// JSON destination; the cell table goes next to it with a .csv
    /// extension. Without it the JSON is printed.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Explicit destination for the CSV cell table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::Nmi(args) => cmd_nmi(args).map(|()| ExitCode::SUCCESS),
        Command::Asymptotics(args) => cmd_asymptotics(args).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<usize> {
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(rayon::current_num_threads())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").context("writing to stdout")
        }
    }
}

fn load_settings(path: &Path) -> Result<ClusterSettings> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).with_context(|| format!("reading settings from {}", path.display()))
}

fn resolve_settings(args: &ClusterArgs) -> Result<ClusterSettings> {
    let mut s = match &args.config {
        Some(path) => load_settings(path)?,
        None => ClusterSettings::with_defaults(args.input.clone().expect("required by clap")),
    };
    if let Some(v) = &args.input {
        s.input = v.clone();
    }
    if args.label_column.is_some() {
        s.label_column = args.label_column;
    }
    s.has_header |= args.has_header;
    if args.subsample.is_some() {
        s.subsample = args.subsample;
    }
    if args.sigma.is_some() {
        s.sigma = args.sigma;
    }
    if args.c_max.is_some() {
        s.c_max = args.c_max;
    }
    s.c0 = args.c0.unwrap_or(s.c0);
    s.lambda = args.lambda.unwrap_or(s.lambda);
    s.gamma_frac = args.gamma_frac.unwrap_or(s.gamma_frac);
    s.step = args.step.unwrap_or(s.step);
    s.segment_grid = args.segment_grid.unwrap_or(s.segment_grid);
    s.seed = args.seed.unwrap_or(s.seed);
    Ok(s)
}

fn cmd_cluster(args: ClusterArgs) -> Result<ExitCode> {
    let threads = set_threads(args.threads)?;
    let settings = resolve_settings(&args)?;
    let started = Instant::now();

    let (data, labels) = load_csv(&settings.input, settings.label_column, settings.has_header)?;
    let (data, labels, indices) = match settings.subsample {
        Some(k) if k < data.n() => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let idx = rand::seq::index::sample(&mut rng, data.n(), k).into_vec();
            let sub_labels = labels.map(|l| idx.iter().map(|&i| l.labels()[i]).collect::<Vec<_>>());
            (data.select_rows(&idx)?, sub_labels, Some(idx))
        }
        _ => (data, labels.map(|l| l.labels().to_vec()), None),
    };
    let load = started.elapsed().as_secs_f64();

    let cfg = settings.spuds_config();
    let result = spuds_cluster(&data, &cfg)?;
    let score = match &labels {
        Some(truth) => Some(nmi(result.partition.assignment(), truth)?),
        None => None,
    };

    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: settings.seed,
        threads,
        resolved: Resolved {
            n: data.n(),
            d: data.d(),
            sigma: result.sigma,
            intrinsic_dim: result.scale.as_ref().map(|s| s.intrinsic_dim),
            s_value: result.scale.as_ref().map(|s| s.s_value),
            gamma: result.gamma,
            c_max: cfg.resolved_c_max(data.n()),
        },
        config: settings,
        subsample_indices: indices,
        result: Outcome::new(&result, score),
        timings: Timings {
            load,
            total: started.elapsed().as_secs_f64(),
            phases: result.timings.clone(),
        },
    };

    if let Some(path) = &args.labels_out {
        let text: String = record.result.labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    write_output(args.output.as_deref(), &serde_json::to_string_pretty(&record)?)?;

    if let Some(w) = result.warning {
        log::warn!("clustering finished with warning: {w:?}");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_nmi(args: NmiArgs) -> Result<()> {
    let pred = load_label_file(&args.pred)?;
    let truth = load_label_file(&args.truth)?;
    let score = nmi(pred.labels(), truth.labels())?;
    println!("{score:.6}");
    Ok(())
}

fn cmd_asymptotics(args: AsymptoticsArgs) -> Result<()> {
    set_threads(args.threads)?;
    let model = DensityModel::by_name(&args.model, args.separation)?;
    let statistic: Statistic = args.statistic.parse()?;
    let surface = HalfspaceSurface::axis(model.dim(), args.surface_offset);
    let cfg = StudyConfig {
        n_grid: args.n_grid,
        seeds: args.seeds,
        base_seed: args.base_seed,
        alpha: args.alpha.unwrap_or_else(|| StudyConfig::default_alpha(model.dim())),
    };
    let run = convergence_study(&model, &surface, statistic, &cfg)?;
    for s in &run.summary {
        if s.missing > 0 {
            log::warn!("n = {}: {} of {} cells had an empty side", s.n, s.missing, cfg.seeds);
        }
    }
    let json = serde_json::to_string_pretty(&run)?;
    write_output(args.output.as_deref(), &json)?;
    let csv_path = args
        .csv
        .or_else(|| args.output.as_ref().map(|p| p.with_extension("csv")));
    if let Some(p) = csv_path {
        fs::write(&p, run.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
