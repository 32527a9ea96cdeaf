//! `lattice` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure. `LATTICE_THREADS` caps the worker pool.

mod commands;
mod config;
mod data;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lattice::{ErrorKind, LatticeError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: LatticeError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Stage { source, .. } => match source.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

/// Tag a core error with the pipeline stage it came from.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for lattice::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

#[derive(Parser)]
#[command(name = "lattice", version, about = "Confidence-gated hybrid sequential predictor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the backbone and archetypes and write `bundle.model`.
    Train(Common),
    /// Sweep the confidence threshold on validation data and freeze it into the bundle.
    Calibrate(Common),
    /// Evaluate the bundle (one seed) or retrain and compare across seeds.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Report backbone metrics only.
        #[arg(long)]
        baseline_only: bool,
        /// Also write per-case predictions to `predictions.tsv`.
        #[arg(long)]
        dump_predictions: bool,
    },
    /// Evaluate the bundle on shifted synthetic data.
    Stress {
        #[command(flatten)]
        common: Common,
        /// Shift magnitudes, comma-separated.
        #[arg(long)]
        magnitude: Option<String>,
    },
    /// Run the four-arm ablation over the configured seeds.
    Ablate(Common),
    /// Write a synthetic corpus.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output file; defaults to `<out>/synth.tsv`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// `0..29`, `0..=29`, or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Bundle path; defaults to `<out>/bundle.model`.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut map = match &self.config {
            Some(p) => config::read_kv(p)?,
            None => BTreeMap::new(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let named = [
            ("data", &self.data),
            ("format", &self.format),
            ("mode", &self.mode),
            ("out", &self.out),
            ("seeds", &self.seeds),
            ("theta", &self.theta),
            ("lambda", &self.lambda),
            ("k", &self.k),
            ("epochs", &self.epochs),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(n) = std::env::var("LATTICE_THREADS") else {
        return Ok(());
    };
    let n: usize = n
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("LATTICE_THREADS must be a positive integer, got {n:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    log::info!("built without the parallel feature; ignoring LATTICE_THREADS={n}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let load = |c: &Common, extra: &[(&str, String)]| -> Result<config::RunConfig, CliError> {
        let mut map = c.settings()?;
        for (k, v) in extra {
            map.insert(k.to_string(), v.clone());
        }
        config::RunConfig::from_map(&map)
    };
    match cli.command {
        Command::Train(c) => commands::train(&load(&c, &[])?, c.bundle.as_deref()),
        Command::Calibrate(c) => commands::calibrate(&load(&c, &[])?, c.bundle.as_deref()),
        Command::Evaluate { common, baseline_only, dump_predictions } => {
            let mut extra = Vec::new();
            if baseline_only {
                extra.push(("baseline_only", "true".to_string()));
            }
            if dump_predictions {
                extra.push(("dump_predictions", "true".to_string()));
            }
            commands::evaluate(&load(&common, &extra)?, common.bundle.as_deref())
        }
        Command::Stress { common, magnitude } => {
            let extra: Vec<_> = magnitude.into_iter().map(|m| ("magnitude", m)).collect();
            commands::stress(&load(&common, &extra)?, common.bundle.as_deref())
        }
        Command::Ablate(c) => commands::ablate(&load(&c, &[])?),
        Command::Synth { common, output, shift } => commands::synth(&load(&common, &[])?, output.as_deref(), shift),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
