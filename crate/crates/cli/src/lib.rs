//! Command-line front end for the `simm` library: curve-table ingestion,
//! TOML model configuration and the `fit`, `align`, `simulate`, `classify`,
//! `cv` and `export-cov` subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;
pub mod report;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{MethodName, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "simm", version, about = "Simultaneous warping and amplitude models for multivariate functional data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed, overriding `fit.seed` (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding `fit.threads` (default 0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model; writes model.json, trace.csv, warps.csv, aligned.csv and parameters.csv.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write observations with their warped times (fits first unless --model is given).
    Align {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Fitted model whose templates the data are aligned to.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output table.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a synthetic curve table from the configuration.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output table.
        #[arg(long)]
        out: PathBuf,
        /// Also write the true latent warps here.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train on one table, classify another; writes predictions.csv and summary.csv.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Classifier, overriding `classify.method`.
        #[arg(long, value_parser = ["simm", "nc"])]
        method: Option<String>,
    },
    /// Chronological k-fold cross-validation; writes folds.csv and predictions.csv.
    Cv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of folds, overriding `classify.folds` (default 5).
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, value_parser = ["simm", "nc"])]
        method: Option<String>,
    },
    /// Export marginal variances, correlations and 95% ellipsoid axes of a fitted model.
    ExportCov {
        #[arg(long)]
        model: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of equidistant grid points.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Add measurement noise to the marginal covariance.
        #[arg(long)]
        with_noise: bool,
    },
}

fn prepare(common: &Common) -> CliResult<RunConfig> {
    let mut config = commands::resolve(&common.config)?;
    if let Some(s) = common.seed {
        config.fit.seed = s;
    }
    if let Some(t) = common.threads {
        config.fit.threads = t;
    }
    Ok(config)
}

fn method(name: &Option<String>, config: &mut RunConfig) {
    match name.as_deref() {
        Some("simm") => config.classify.method = MethodName::Simm,
        Some("nc") => config.classify.method = MethodName::Nc,
        _ => {}
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Fit { common, data, out } => {
            let config = prepare(&common)?;
            in_pool(config.fit.threads, || commands::run_fit(&config, &data, &out))
        }
        Command::Align { common, data, model, out } => {
            let config = prepare(&common)?;
            in_pool(config.fit.threads, || commands::run_align(&config, &data, model.as_deref(), &out))
        }
        Command::Simulate { common, out, truth } => {
            let config = prepare(&common)?;
            in_pool(config.fit.threads, || commands::run_simulate(&config, &out, truth.as_deref()))
        }
        Command::Classify { common, train, test, out, method: m } => {
            let mut config = prepare(&common)?;
            method(&m, &mut config);
            in_pool(config.fit.threads, || commands::run_classify(&config, &train, &test, &out))
        }
        Command::Cv { common, data, out, folds, method: m } => {
            let mut config = prepare(&common)?;
            method(&m, &mut config);
            if let Some(k) = folds {
                config.classify.folds = k;
            }
            in_pool(config.fit.threads, || commands::run_cv(&config, &data, &out))
        }
        Command::ExportCov { model, out, grid, with_noise } => commands::run_export_cov(&model, grid, with_noise, &out),
    }
}

/// Run the command line given by `args` (including the program name) and
/// return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
