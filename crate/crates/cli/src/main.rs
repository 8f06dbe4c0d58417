//! `mgltree` — train, evaluate and audit multi-group learners from a JSON
//! run configuration.
//!
//! Exit codes: 0 success, 1 domain failure (invalid hierarchy, failed
//! audit, learner or data errors), 2 usage or I/O failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mgltree", version, about = "Multi-group learning over hierarchical groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set trials=3` or `--set split.seed=7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that the configured groups are pairwise disjoint or nested.
    ValidateHierarchy {
        #[command(flatten)]
        common: Common,
    },
    /// Fit every configured method on the full dataset and write models.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the repeated-split experiment and write the per-group report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for trials (1 runs sequentially).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Replay a trained MGL-Tree model on its training data.
    Audit {
        #[command(flatten)]
        common: Common,
        /// MGL-Tree model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Training CSV; defaults to the config's dataset.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write a synthetic dataset CSV and its schema.
    Synth {
        /// Synthetic spec JSON; omit to draw a random hierarchical spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the schema JSON (default: next to the CSV).
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn domain(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    /// I/O and JSON problems are usage failures, everything else is a
    /// domain failure.
    pub fn from_error(e: mgltree::Error) -> Self {
        use mgltree::Error as E;
        match e {
            E::Io { .. } | E::Json(_) | E::Mismatch(_) => Failure::usage(e.to_string()),
            _ => Failure::domain(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateHierarchy { common } => commands::validate_hierarchy(&common.config, &common.overrides),
        Command::Train { common, out } => commands::train(&common.config, &common.overrides, out.as_deref()),
        Command::Evaluate { common, out, jobs } => {
            commands::evaluate(&common.config, &common.overrides, out.as_deref(), jobs)
        }
        Command::Audit { common, model, data } => {
            commands::audit(&common.config, &common.overrides, &model, data.as_deref())
        }
        Command::Synth {
            spec,
            seed,
            out,
            schema_out,
        } => commands::synth(spec.as_deref(), seed, &out, schema_out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
