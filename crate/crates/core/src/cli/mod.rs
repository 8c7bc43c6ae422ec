//! Command-line front end behind the `ldlf` binary.
//!
//! Training options resolve in three layers: built-in defaults, then an
//! optional JSON config file (`--config`, flat keys named like the long
//! flags), then flags given on the command line.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::data::DatasetFormat;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "ldlf", version, about = "Label distribution learning forests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest on a dataset and write the model as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
        /// Training log (tab-separated iteration, loss, seconds); defaults to
        /// the model path with a `.log.tsv` suffix.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Log every this many SGD steps.
        #[arg(long, default_value_t = 100)]
        log_every: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict every sample of a dataset: C probabilities and the argmax label.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a model on a dataset with the six measures.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        folds: Option<usize>,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Write a synthetic dataset and its ground-truth sidecar.
    Synth {
        /// Dataset path; the sidecar goes to `<out>.truth.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: Option<DatasetFormat>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 8)]
        labels: usize,
        #[arg(long, value_enum, default_value_t = SynthModeArg::Mixture)]
        mode: SynthModeArg,
        /// Feature clusters.
        #[arg(long, default_value_t = 4)]
        components: usize,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        /// Peak width in label units.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-validate once per value of a tree-count or tree-depth axis.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Table path (tab-separated); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthModeArg {
    #[value(name = "gaussian-unimodal", alias = "unimodal")]
    Unimodal,
    #[value(name = "two-component-mixture", alias = "mixture")]
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "tree_count", alias = "tree-count")]
    TreeCount,
    #[value(name = "tree_depth", alias = "tree-depth")]
    TreeDepth,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Dataset format; guessed from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<DatasetFormat>,
}

impl DataArgs {
    pub fn format(&self) -> DatasetFormat {
        self.format.unwrap_or_else(|| DatasetFormat::from_path(&self.dataset))
    }
}

fn parse_format(s: &str) -> std::result::Result<DatasetFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Training overrides shared by `train`, `cv` and `sweep`.
#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub tree_depth: Option<usize>,
    #[arg(long)]
    pub output_units: Option<usize>,
    #[arg(long)]
    pub leaf_iters: Option<usize>,
    #[arg(long)]
    pub buffer_batches: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub theta_init_std: Option<f64>,
    /// Drop the bias column of the feature function.
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long)]
    pub early_stop: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub trees: Option<usize>,
    pub tree_depth: Option<usize>,
    pub output_units: Option<usize>,
    pub leaf_iters: Option<usize>,
    pub buffer_batches: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub theta_init_std: Option<f64>,
    pub bias: Option<bool>,
    pub early_stop: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub folds: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn apply(&self, c: &mut TrainConfig) {
        set(&mut c.tree_count, self.trees);
        set(&mut c.tree_depth, self.tree_depth);
        set(&mut c.output_units, self.output_units);
        set(&mut c.leaf_update_iters, self.leaf_iters);
        set(&mut c.buffer_batches, self.buffer_batches);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.max_iterations, self.max_iterations);
        set(&mut c.learning_rate, self.learning_rate);
        set(&mut c.momentum, self.momentum);
        set(&mut c.theta_init_std, self.theta_init_std);
        set(&mut c.bias, self.bias);
        set(&mut c.early_stop, self.early_stop);
        set(&mut c.seed, self.seed);
        set(&mut c.threads, self.threads);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TrainArgs {
    /// Defaults, then the config file, then flags. Also returns the fold
    /// count from the file, if any.
    pub fn resolve(&self) -> Result<(TrainConfig, Option<usize>)> {
        let mut config = TrainConfig::default();
        let mut folds = None;
        if let Some(path) = &self.config {
            let file = ConfigFile::load(path)?;
            file.apply(&mut config);
            folds = file.folds;
        }
        set(&mut config.tree_count, self.trees);
        set(&mut config.tree_depth, self.tree_depth);
        set(&mut config.output_units, self.output_units);
        set(&mut config.leaf_update_iters, self.leaf_iters);
        set(&mut config.buffer_batches, self.buffer_batches);
        set(&mut config.batch_size, self.batch_size);
        set(&mut config.max_iterations, self.max_iterations);
        set(&mut config.learning_rate, self.learning_rate);
        set(&mut config.momentum, self.momentum);
        set(&mut config.theta_init_std, self.theta_init_std);
        set(&mut config.seed, self.seed);
        set(&mut config.threads, self.threads);
        if self.no_bias {
            config.bias = false;
        }
        if self.early_stop {
            config.early_stop = true;
        }
        config.validate()?;
        Ok((config, folds))
    }
}
