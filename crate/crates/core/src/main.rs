use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stein_features::bench::{
    emit_report, load_csv, load_feature_columns, render_report, run_kernel_approx, run_regression, timing_rows, Cell,
    ExperimentConfig, Method, MethodSettings, ModelBundle, ReportFormat, ReportRow, TrainingSettings,
};
use stein_features::{Error, Result};

#[derive(Parser)]
#[command(name = "stein-features", version, about = "Spectral feature GP regression and kernel approximation benchmarks")]
struct Cli {
    /// Replace the configured seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Gram-matrix approximation error sweep.
    KernelApprox {
        #[arg(long)]
        config: PathBuf,
        /// Report path (overrides the config; stdout when neither is set).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regression benchmark over methods, datasets and seeds.
    Regression {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one method to a CSV and save the model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: String,
        /// One of ssgp-rbf, ssgp, ssgp-Rstar, ssgp-svgd, msrfr.
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        /// Frequencies per model.
        #[arg(long, default_value_t = 50)]
        frequencies: usize,
        /// Mixture components.
        #[arg(long, default_value_t = 6)]
        components: usize,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Predict with a saved model; writes mean and variance per row.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct PredictionRow {
    mean: f64,
    variance: f64,
}

impl ReportRow for PredictionRow {
    fn header() -> &'static [&'static str] {
        &["mean", "variance"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![Cell::Float(self.mean), Cell::Float(self.variance)]
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(f) = cli.format {
        config.format = f.into();
    }
    Ok(config)
}

fn write_rows<R: ReportRow>(rows: &[R], out: Option<&Path>, format: ReportFormat) -> Result<()> {
    match out {
        Some(path) => emit_report(rows, path, format),
        None => {
            let text = render_report(rows, format)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::KernelApprox { config, out } => {
            let config = load_config(config, cli)?;
            let rows = run_kernel_approx(&config)?;
            write_rows(&rows, out.as_deref().or(config.output.as_deref()), config.format)
        }
        Command::Regression { config, out } => {
            let config = load_config(config, cli)?;
            let rows = run_regression(&config)?;
            let out = out.as_deref().or(config.output.as_deref());
            write_rows(&rows, out, config.format)?;
            if let Some(path) = out {
                let mut sidecar = path.as_os_str().to_owned();
                sidecar.push(".timing.csv");
                emit_report(&timing_rows(&rows), Path::new(&sidecar), ReportFormat::Csv)?;
            }
            Ok(())
        }
        Command::Fit {
            data,
            target,
            method,
            out,
            frequencies,
            components,
            iterations,
        } => {
            let method: Method = method.parse()?;
            let dataset = load_csv(data, target)?;
            let mut training = TrainingSettings::default();
            if let Some(it) = iterations {
                training.iterations = *it;
            }
            let settings = MethodSettings {
                frequencies: *frequencies,
                components: *components,
                training,
            };
            let bundle = ModelBundle::fit(&dataset, target, method, &settings, cli.seed.unwrap_or(0))?;
            bundle.save(out)
        }
        Command::Predict { model, data, out } => {
            let bundle = ModelBundle::load(model)?;
            let x = load_feature_columns(data, &bundle.feature_names)?;
            let (mean, variance) = bundle.predict(&x)?;
            let rows: Vec<PredictionRow> = mean
                .iter()
                .zip(variance.iter())
                .map(|(&mean, &variance)| PredictionRow { mean, variance })
                .collect();
            emit_report(&rows, out, cli.format.map_or(ReportFormat::Csv, Into::into))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
