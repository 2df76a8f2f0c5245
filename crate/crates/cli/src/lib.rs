//! Configuration-driven driver for the fracdg solver: single solves,
//! convergence and temporal-order studies, operator checks and diagnostics.
//! Every run writes `summary.json`, its CSV/text artifacts and `manifest.json`
//! under the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

pub use commands::{Study, CACHE_ENV};
pub use config::{parse_config, parse_config_str, Overrides, RunConfig};
pub use error::{CliError, Result};

/// Version of the `summary.json` layout described in `schema/summary.schema.json`.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fracdg", version, about = "RKDG solver for fractional conservation laws")]
pub struct Cli {
    #[command(subcommand)]
    pub study: Study,

    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub flux: Option<config::FluxName>,

    /// Fractional order, in (0, 1)
    #[arg(long, global = true)]
    pub lambda: Option<f64>,

    /// Polynomial degree
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Comma-separated cell counts; a single value also sets N
    #[arg(long, global = true, value_delimiter = ',')]
    pub grids: Option<Vec<usize>>,

    #[arg(long, global = true)]
    pub cfl: Option<f64>,

    /// Final time
    #[arg(long = "T", global = true)]
    pub final_time: Option<f64>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            flux: self.flux,
            lambda: self.lambda,
            k: self.k,
            grids: self.grids.clone(),
            cfl: self.cfl,
            final_time: self.final_time,
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

/// Runs the study and writes its artifacts; `Ok(pass)`.
pub fn execute(cli: &Cli) -> Result<bool> {
    let cfg = parse_config(cli.config.as_deref(), &cli.overrides())?;
    let outcome = commands::execute(cli.study, &cfg);
    let summary = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": cli.study,
        "pass": outcome.pass,
        "error": outcome.error,
        "config": cfg,
        "defaults": cfg.defaulted,
        "result": outcome.result,
    });
    let mut files = outcome.files;
    let mut text = serde_json::to_vec_pretty(&summary)?;
    text.push(b'\n');
    files.push((output::SUMMARY_FILE.to_string(), text));
    let manifest = output::write_artifacts(&cfg.output.dir, &files)?;
    let status = if outcome.pass { "pass" } else { "FAIL" };
    println!(
        "{}: {status}, {} files in {}",
        serde_json::to_value(cli.study)?.as_str().unwrap_or("run"),
        manifest.files.len() + 1,
        cfg.output.dir.display()
    );
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    Ok(outcome.pass)
}
