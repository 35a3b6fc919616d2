//! `adtomo`: simulate an ad ecosystem and infer tracker-to-advertiser
//! sharing from the ads each persona sees.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O or input
//! data error. Log verbosity follows `RUST_LOG` (default `warn`).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adtomo_core::artifacts::{self, ArtifactError};
use adtomo_core::ecosim::profiles;
use adtomo_core::pipeline::{self, profile_config, PipelineConfig, PipelineError, Prepared};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "adtomo", version, about = "Ad-ecosystem simulator and data-sharing tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in profile to use instead of --config.
    #[arg(long, global = true, conflicts_with = "config")]
    profile: Option<String>,
    /// Override the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the configuration's output_dir, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory holding the stage's inputs (default: the output directory).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configuration of a built-in profile.
    Init,
    /// World -> ad, request and bid logs, personas and planted graph.
    Simulate,
    /// Ad log -> flagged vector records.
    Flag,
    /// Flagged records -> inference report (JSON and CSV).
    Infer,
    /// Ad log -> interest-group similarity matrix.
    H1,
    /// Request log -> cookie-sync pairs.
    Syncdetect,
    /// Report + planted graph -> precision and recall.
    Evaluate,
    /// Every stage in order.
    Run,
    /// List built-in profiles.
    Profiles,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] ArtifactError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(ArtifactError::Parse { .. }) => 2,
            CliError::Io(ArtifactError::Io { .. }) => 3,
            CliError::Pipeline(e) => e.exit_code() as u8,
        }
    }
}

fn load_config(c: &Common) -> Result<PipelineConfig, CliError> {
    let config = match (&c.config, &c.profile) {
        (Some(path), _) => artifacts::read_json::<PipelineConfig>(path)?,
        (None, Some(name)) => profile_config(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown profile {name:?}; available: {}",
                profiles::NAMES.join(", ")
            ))
        })?,
        (None, None) => return Err(CliError::Usage("--config or --profile is required".into())),
    };
    let mut config = config.with_seed(c.seed);
    if let Some(out) = &c.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn dirs(c: &Common, config: Option<&PipelineConfig>) -> (PathBuf, PathBuf) {
    let out = c
        .out
        .clone()
        .or_else(|| config.map(PipelineConfig::output_dir))
        .unwrap_or_else(|| PathBuf::from("out"));
    let input = c.input.clone().unwrap_or_else(|| out.clone());
    (input, out)
}

fn prepared(c: &Common, full: bool) -> Result<(Prepared, PathBuf, PathBuf), CliError> {
    let config = load_config(c)?;
    let p = if full { config.prepare() } else { config.prepare_world() }
        .map_err(PipelineError::from)?;
    let (input, out) = dirs(c, Some(&p.config));
    Ok((p, input, out))
}

fn optional_config(c: &Common) -> Result<Option<PipelineConfig>, CliError> {
    if c.config.is_some() || c.profile.is_some() {
        load_config(c).map(Some)
    } else {
        Ok(None)
    }
}

fn report_written(out: &Path) {
    log::info!("artifacts written to {}", out.display());
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let common = cli.common;
    match cli.command {
        Command::Profiles => {
            for name in profiles::NAMES {
                println!("{name}");
            }
        }
        Command::Init => {
            let name = common
                .profile
                .clone()
                .ok_or_else(|| CliError::Usage("init needs --profile".into()))?;
            let mut c = common.clone();
            c.out = None;
            let config = load_config(&c)?;
            let text = serde_json::to_string_pretty(&config).expect("config serializes");
            match &common.out {
                Some(path) => artifacts::write_text(path, &(text + "\n"))?,
                // a closed pipe (`| head`) is not an error
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                }
            }
            log::info!("wrote profile {name}");
        }
        Command::Simulate => {
            let (p, _, out) = prepared(&common, false)?;
            pipeline::stage_simulate(&p, &out)?;
            report_written(&out);
        }
        Command::Flag => {
            let (p, input, out) = prepared(&common, true)?;
            pipeline::stage_flag(&p, &input, &out)?;
            report_written(&out);
        }
        Command::Infer => {
            let (p, input, out) = prepared(&common, true)?;
            let report = pipeline::stage_infer(&p, &input, &out)?;
            for (t, a) in report.inferred_edges() {
                println!("{t} -> {a}");
            }
        }
        Command::Evaluate => {
            let config = optional_config(&common)?;
            let (input, out) = dirs(&common, config.as_ref());
            let s = pipeline::stage_evaluate(&input, &out)?;
            println!("precision {:.4} recall {:.4}", s.metrics.precision, s.metrics.recall);
        }
        Command::H1 => {
            let config = optional_config(&common)?;
            let (input, out) = dirs(&common, config.as_ref());
            pipeline::stage_h1(&input, &out)?;
            report_written(&out);
        }
        Command::Syncdetect => {
            let config = optional_config(&common)?;
            let (input, out) = dirs(&common, config.as_ref());
            pipeline::stage_syncdetect(&input, &out)?;
            report_written(&out);
        }
        Command::Run => {
            let config = load_config(&common)?;
            let s = pipeline::run_pipeline(&config)?;
            println!("precision {:.4} recall {:.4}", s.metrics.precision, s.metrics.recall);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
