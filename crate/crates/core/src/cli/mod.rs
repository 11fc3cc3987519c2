//! Command-line front end, run-config files and model checkpoints.

mod checkpoint;
mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use checkpoint::{ModelCheckpoint, TrainingMetadata, CHECKPOINT_VERSION};
pub use commands::{
    cmd_detect, cmd_evaluate, cmd_evaluate_predictions, cmd_generate, cmd_train, format_index,
    parse_index, TrainPaths,
};
pub use config::{default_epochs, default_layers, RunConfig, GRU_LAYERS, LSTM_LAYERS};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "accident-detect",
    version,
    about = "Traffic accident detection with recurrent networks"
)]
pub struct Cli {
    /// Run-config file (`key = value` lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override every seed in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic window dataset
    Generate { output: PathBuf },
    /// Train a model and write its checkpoint and test-partition index
    Train {
        data: PathBuf,
        model: PathBuf,
        /// Defaults to `<model>.test-index.txt`
        #[arg(long)]
        test_index: Option<PathBuf>,
        /// Per-epoch loss CSV; defaults to `<model>.loss.csv`
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Score the test partition and write metrics.csv and roc.csv.
    ///
    /// Paths: MODEL DATA TEST_INDEX REPORT_DIR, or REPORT_DIR alone with
    /// --predictions.
    Evaluate {
        #[arg(required = true, num_args = 1..=4)]
        paths: Vec<PathBuf>,
        /// Score a `probability,label` CSV instead of running a model
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Decision threshold for --predictions
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Print `row_index,probability,decision` per window
    Detect { model: PathBuf, data: PathBuf },
}

/// `<path><suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg =
            RunConfig::load_or_default(self.config.as_deref()).map_err(|e| e.in_stage("config"))?;
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        Ok(cfg)
    }

    pub fn run(&self, out: &mut dyn Write) -> Result<()> {
        let cfg = self.run_config()?;
        match &self.command {
            Command::Generate { output } => cmd_generate(&cfg, output, out).map(|_| ()),
            Command::Train {
                data,
                model,
                test_index,
                loss_log,
            } => {
                let test_index = test_index
                    .clone()
                    .unwrap_or_else(|| sibling(model, ".test-index.txt"));
                let loss_log = loss_log
                    .clone()
                    .unwrap_or_else(|| sibling(model, ".loss.csv"));
                let paths = TrainPaths {
                    data,
                    model,
                    test_index: &test_index,
                    loss_log: &loss_log,
                };
                cmd_train(&cfg, &paths, out).map(|_| ())
            }
            Command::Evaluate {
                paths,
                predictions,
                threshold,
            } => match (predictions, paths.as_slice()) {
                (Some(p), [report]) => {
                    cmd_evaluate_predictions(p, *threshold, report, out).map(|_| ())
                }
                (None, [model, data, index, report]) => {
                    cmd_evaluate(model, data, index, report, out).map(|_| ())
                }
                (Some(_), _) => Err(Error::invalid("with --predictions, give only REPORT_DIR")),
                (None, _) => Err(Error::invalid(
                    "evaluate needs MODEL DATA TEST_INDEX REPORT_DIR",
                )),
            },
            Command::Detect { model, data } => cmd_detect(model, data, out),
        }
    }
}
