//! Argument declarations, the flat key=value configuration file, and the
//! flag > config file > environment > default layering that produces the
//! settings each command runs with.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bciqt::dataset::Label;
use bciqt::evaluation::{ExperimentConfig, MaskMode, ModelKind, SelectionScope};
use bciqt::quantum::DecisionConfig;

/// Default data directory when no path flags or config entries name one.
pub const DATA_DIR_ENV: &str = "BCIQT_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration; exits 2.
    #[error("{0}")]
    Usage(String),
    /// Data, model, or I/O failure at run time; exits 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

pub fn runtime(message: impl Display) -> CliError {
    CliError::Runtime(message.to_string())
}

#[derive(Parser)]
#[command(
    name = "bciqt",
    version,
    about = "One-vs-all benchmark of a detection-theoretic binary classifier \
             against from-scratch KNN and Naive Bayes baselines"
)]
pub struct Cli {
    /// Flat key=value configuration file; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker thread cap for parallel sections (0 = one per core)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train on one split, evaluate on the other, and render the recall table
    Evaluate(EvaluateArgs),
    /// Fit models and write them to a directory as JSON
    Train(TrainArgs),
    /// Score samples with trained detector files
    Predict(PredictArgs),
    /// Rank features by chi-square score and write the mask
    SelectFeatures(SelectFeaturesArgs),
}

#[derive(Args)]
pub struct TrainDataArgs {
    /// Directory holding the standard IDX names (train-images-idx3-ubyte and
    /// friends, plain or .gz); also settable via config file or BCIQT_DATA_DIR
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// IDX image file with training samples (plain or .gz)
    #[arg(long, value_name = "FILE", requires = "train_labels")]
    pub train_images: Option<PathBuf>,
    /// IDX label file with training labels (plain or .gz)
    #[arg(long, value_name = "FILE", requires = "train_images")]
    pub train_labels: Option<PathBuf>,
    /// Labeled CSV training data
    #[arg(long, value_name = "FILE", conflicts_with_all = ["train_images", "train_labels"])]
    pub train_csv: Option<PathBuf>,
    /// CSV label column, by name or zero-based index (default "label")
    #[arg(long, value_name = "COL")]
    pub label_column: Option<String>,
}

#[derive(Args)]
pub struct TestDataArgs {
    /// IDX image file with test samples (plain or .gz)
    #[arg(long, value_name = "FILE", requires = "test_labels")]
    pub test_images: Option<PathBuf>,
    /// IDX label file with test labels (plain or .gz)
    #[arg(long, value_name = "FILE", requires = "test_images")]
    pub test_labels: Option<PathBuf>,
    /// Labeled CSV test data
    #[arg(long, value_name = "FILE", conflicts_with_all = ["test_images", "test_labels"])]
    pub test_csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// How many top-scoring features to keep (default 100)
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
    /// Detection trade-off λ > 0; mutually exclusive with --xi
    #[arg(long, value_name = "X", conflicts_with = "xi")]
    pub lambda: Option<f64>,
    /// Negative-class prior ξ in [0, 1); λ is derived as ξ/(1-ξ)
    #[arg(long, value_name = "X")]
    pub xi: Option<f64>,
    /// Decision threshold in [0, 1] (default 0.5)
    #[arg(long, value_name = "X")]
    pub threshold: Option<f64>,
    /// Categories to handle one-vs-all (default 0,1,...,8)
    #[arg(long, value_delimiter = ',', value_name = "C,...")]
    pub categories: Option<Vec<Label>>,
    /// Models to run: bciqt, knn, nb
    #[arg(long, value_delimiter = ',', value_parser = parse_model, value_name = "M,...")]
    pub models: Option<Vec<ModelKind>>,
    /// Seed for fold shuffling (default 42)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Select a separate feature mask per category instead of one shared mask
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub per_category_masks: Option<bool>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub train_data: TrainDataArgs,
    #[command(flatten)]
    pub test_data: TestDataArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Binarize test vectors to presence indicators (default true)
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub binarize: Option<bool>,
    /// Cross-validation folds for baseline hyperparameters (default 5)
    #[arg(long, value_name = "N")]
    pub folds: Option<usize>,
    /// Fixed neighbor count for KNN, skipping cross-validation
    #[arg(long, value_name = "K")]
    pub knn_k: Option<usize>,
    /// Re-select features inside each cross-validation fold
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub per_fold_selection: Option<bool>,
    /// Report format (default table)
    #[arg(long, value_enum, value_name = "FMT")]
    pub format: Option<OutputFormat>,
    /// Report file; the recall table still prints to standard output
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub train_data: TrainDataArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Directory receiving the model and mask files
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Directory containing bciqt-<category>.json files written by `train`
    #[arg(long, value_name = "DIR")]
    pub model_dir: Option<PathBuf>,
    /// IDX image file to score (plain or .gz)
    #[arg(long, value_name = "FILE")]
    pub images: Option<PathBuf>,
    /// Labeled CSV to score; the label column is dropped, not used
    #[arg(long, value_name = "FILE", conflicts_with = "images")]
    pub csv: Option<PathBuf>,
    /// CSV label column to drop, by name or zero-based index (default "label")
    #[arg(long, value_name = "COL")]
    pub label_column: Option<String>,
    /// Score against these categories only
    #[arg(long, value_delimiter = ',', value_name = "C,...")]
    pub categories: Option<Vec<Label>>,
    /// Binarize features to presence indicators (default true)
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub binarize: Option<bool>,
}

#[derive(Args)]
pub struct SelectFeaturesArgs {
    #[command(flatten)]
    pub train_data: TrainDataArgs,
    /// How many features to keep (default 100)
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
    /// Rank by one category's separation instead of the max over categories
    #[arg(long, value_name = "C")]
    pub category: Option<Label>,
    /// Mask file to write (default mask.json)
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected table, csv, or json)")),
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

const KNOWN_KEYS: &[&str] = &[
    "binarize",
    "categories",
    "category",
    "csv",
    "data_dir",
    "folds",
    "format",
    "images",
    "jobs",
    "knn_k",
    "label_column",
    "lambda",
    "model_dir",
    "models",
    "output",
    "output_dir",
    "per_category_masks",
    "per_fold_selection",
    "seed",
    "test_csv",
    "test_images",
    "test_labels",
    "threshold",
    "top_k",
    "train_csv",
    "train_images",
    "train_labels",
    "xi",
];

/// The parsed key=value configuration file; empty when none was given.
/// Keys mirror the long flag names with underscores; `#` starts a comment.
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|error| runtime(format!("reading {}: {error}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let location = format!("{}:{}", path.display(), index + 1);
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!("{location}: expected key=value, got {line:?}")));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!("{location}: unknown key {key:?}")));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(usage(format!("{location}: duplicate key {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|error| usage(format!("config {key} = {raw:?}: {error}"))),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|error| usage(format!("config {key} = {raw:?}: {error}")))
                })
                .collect::<Result<Vec<T>, CliError>>()
                .map(Some),
        }
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(PathBuf::from)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

/// Builds the decision parameters, rejecting a λ and ξ given together (one
/// determines the other).
pub fn resolve_decision(
    lambda: Option<f64>,
    xi: Option<f64>,
    threshold: Option<f64>,
    file: &ConfigFile,
) -> Result<DecisionConfig<f64>, CliError> {
    let lambda = match lambda {
        Some(value) => Some(value),
        None => file.get("lambda")?,
    };
    let xi = match xi {
        Some(value) => Some(value),
        None => file.get("xi")?,
    };
    let threshold = match threshold {
        Some(value) => Some(value),
        None => file.get("threshold")?,
    }
    .unwrap_or(0.5);

    let invalid = |error: bciqt::quantum::QuantumError| usage(error.to_string());
    match (lambda, xi) {
        (Some(_), Some(_)) => {
            Err(usage("lambda and xi are mutually exclusive; λ is derived from ξ"))
        }
        (Some(lambda), None) => DecisionConfig::default()
            .with_threshold(threshold)
            .and_then(|config| config.with_lambda(lambda))
            .map_err(invalid),
        (None, Some(xi)) => DecisionConfig::from_prior(xi, threshold).map_err(invalid),
        (None, None) => DecisionConfig::default().with_threshold(threshold).map_err(invalid),
    }
}

/// Layers the experiment flags over the config file and defaults, and
/// validates the result before any data is read.
pub fn resolve_experiment_config(
    experiment: &ExperimentArgs,
    binarize: Option<bool>,
    folds: Option<usize>,
    knn_k: Option<usize>,
    per_fold_selection: Option<bool>,
    file: &ConfigFile,
) -> Result<ExperimentConfig<f64>, CliError> {
    let defaults = ExperimentConfig::<f64>::default();
    let layered = |flag: Option<usize>, key: &str| -> Result<Option<usize>, CliError> {
        match flag {
            Some(value) => Ok(Some(value)),
            None => file.get(key),
        }
    };
    let layered_bool = |flag: Option<bool>, key: &str| -> Result<Option<bool>, CliError> {
        match flag {
            Some(value) => Ok(Some(value)),
            None => file.get(key),
        }
    };

    let decision =
        resolve_decision(experiment.lambda, experiment.xi, experiment.threshold, file)?;
    let models = match &experiment.models {
        Some(models) => models.clone(),
        None => file.get_list("models")?.unwrap_or(defaults.models),
    };
    let categories = match &experiment.categories {
        Some(categories) => categories.clone(),
        None => file.get_list("categories")?.unwrap_or(defaults.categories),
    };
    let top_k = layered(experiment.top_k, "top_k")?.unwrap_or(defaults.top_k);
    if top_k == 0 {
        return Err(usage("top_k must be at least 1"));
    }
    let config = ExperimentConfig {
        models,
        categories,
        top_k,
        decision,
        folds: layered(folds, "folds")?.unwrap_or(defaults.folds),
        seed: match experiment.seed {
            Some(value) => value,
            None => file.get("seed")?.unwrap_or(defaults.seed),
        },
        binarize_tests: layered_bool(binarize, "binarize")?.unwrap_or(defaults.binarize_tests),
        mask_mode: if layered_bool(experiment.per_category_masks, "per_category_masks")?
            .unwrap_or(false)
        {
            MaskMode::PerCategory
        } else {
            MaskMode::SharedMax
        },
        selection_scope: if layered_bool(per_fold_selection, "per_fold_selection")?
            .unwrap_or(false)
        {
            SelectionScope::PerFold
        } else {
            SelectionScope::FullTrainingSet
        },
        knn_k: layered(knn_k, "knn_k")?,
        knn_candidates: defaults.knn_candidates,
    };
    config.validate().map_err(|error| usage(error.to_string()))?;
    Ok(config)
}
