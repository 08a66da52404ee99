//! Command-line interface.
//!
//! Subcommands: `synth`, `train`, `classify`, `evaluate`, `benchmark`,
//! `inspect`. Global flags `--config`, `--seed`, `--threads`,
//! `--output`. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numeric error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{benchmark_inference, fit_method, run_experiment};
use crate::pipeline::config::{load_config, ExperimentConfig, Method};
use crate::pipeline::dataset::{generate_synthetic, load_dataset, save_dataset, DataFormat};
use crate::pipeline::model_io::{load_model, save_model, ModelArtifact};
use crate::pipeline::report::{render_benchmark, render_report, ReportFormat};

#[derive(Parser, Debug)]
#[command(
    name = "csen",
    version,
    about = "Sparse support estimation classifiers: dictionaries, CRC/SRC, and compact support-estimator networks"
)]
struct Cli {
    /// Key-value experiment config file (unknown keys are errors)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for every stochastic stage
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fold-level parallelism cap
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file (defaults to stdout where applicable)
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long = "per-class", default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
    },
    /// Fit one method on a whole dataset and write a model artifact
    Train {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long)]
        method: Option<String>,
    },
    /// Classify a dataset with a saved model (predictions CSV)
    Classify {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Cross-validated evaluation of one method
    Evaluate {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long)]
        method: Option<String>,
        /// Report format: text | csv | json
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Wall-clock inference timing over a held-out split
    Benchmark {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Comma-separated method list
        #[arg(long, default_value = "csen1,crc")]
        methods: String,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
    },
    /// Print the structure and parameter counts of a saved model
    Inspect {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    config.validate()?;
    Ok(config)
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn require_output(output: &Option<PathBuf>) -> Result<&Path> {
    output
        .as_deref()
        .ok_or_else(|| Error::Parameter("this subcommand needs --output <path>".into()))
}

fn parse_method(flag: &Option<String>, config: &ExperimentConfig) -> Result<Method> {
    match flag {
        Some(s) => s.parse(),
        None => Ok(config.method),
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = effective_config(&cli)?;
    match &cli.command {
        Command::Synth {
            classes,
            per_class,
            dim,
            separation,
        } => {
            let path = require_output(&cli.output)?;
            let dataset =
                generate_synthetic(*classes, *per_class, *dim, *separation, config.seed)?;
            save_dataset(&dataset, path, DataFormat::from_path(path))?;
            println!(
                "wrote {} samples ({} classes, d={}) to {}",
                dataset.len(),
                dataset.class_count(),
                dataset.dim(),
                path.display()
            );
            Ok(())
        }
        Command::Train { data, method } => {
            let out = require_output(&cli.output)?;
            let method = parse_method(method, &config)?;
            let dataset = load_dataset(data, DataFormat::from_path(data))?;
            let fitted = fit_method(&dataset, method, &config, config.seed)?;
            let artifact = ModelArtifact::new(fitted);
            save_model(&artifact, out)?;
            println!("trained {} on {} samples -> {}", method, dataset.len(), out.display());
            Ok(())
        }
        Command::Classify { model, data } => {
            let artifact = load_model(model)?;
            let dataset = load_dataset(data, DataFormat::from_path(data))?;
            if dataset.dim() != artifact.fitted.standardizer.dim() {
                return Err(Error::Data(format!(
                    "model expects d={}, dataset has d={}",
                    artifact.fitted.standardizer.dim(),
                    dataset.dim()
                )));
            }
            let c = artifact.fitted.class_names.len();
            let mut out = String::from("index,predicted");
            for i in 0..c {
                let _ = write!(out, ",score_{i}");
            }
            out.push('\n');
            for i in 0..dataset.len() {
                let decision = artifact.fitted.classify(dataset.features.row(i))?;
                let _ = write!(
                    out,
                    "{i},{}",
                    artifact.fitted.class_names[decision.class_index]
                );
                for s in &decision.scores {
                    let _ = write!(out, ",{s}");
                }
                out.push('\n');
            }
            emit(&cli.output, &out)
        }
        Command::Evaluate {
            data,
            method,
            format,
        } => {
            let method = parse_method(method, &config)?;
            let format = ReportFormat::parse(format)?;
            let dataset = load_dataset(data, DataFormat::from_path(data))?;
            let report = run_experiment(&dataset, method, &config)?;
            emit(&cli.output, &render_report(&report, format))
        }
        Command::Benchmark {
            data,
            methods,
            queries,
        } => {
            let methods: Vec<Method> = methods
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?;
            if methods.is_empty() {
                return Err(Error::Parameter("benchmark needs at least one method".into()));
            }
            let dataset = load_dataset(data, DataFormat::from_path(data))?;
            let report = benchmark_inference(&dataset, &methods, &config, *queries)?;
            emit(&cli.output, &render_benchmark(&report))
        }
        Command::Inspect { model } => {
            let artifact = load_model(model)?;
            print!("{}", artifact.describe());
            Ok(())
        }
    }
}

/// Entry point shared by the binary and the tests. Never panics on bad
/// input; returns the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also for --help/--version)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
