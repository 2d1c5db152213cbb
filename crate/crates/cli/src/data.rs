//! Dataset source resolution. Explicit CSV beats explicit IDX paths beats a
//! data directory searched for the standard MNIST file names; each field is
//! layered flag > config file first, and the directory additionally falls
//! back to the BCIQT_DATA_DIR environment variable.

use std::path::{Path, PathBuf};

use bciqt::dataset::{load_csv_path, Dataset, LabelColumn};

use crate::opts::{runtime, usage, CliError, ConfigFile, TestDataArgs, TrainDataArgs, DATA_DIR_ENV};

#[derive(Debug, Clone, Copy)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn idx_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Split::Train => "training",
            Split::Test => "test",
        }
    }

    fn flag_prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, label_column: LabelColumn },
}

pub fn train_source(args: &TrainDataArgs, file: &ConfigFile) -> Result<Source, CliError> {
    let csv = args.train_csv.clone().or_else(|| file.get_path("train_csv"));
    let images = args.train_images.clone().or_else(|| file.get_path("train_images"));
    let labels = args.train_labels.clone().or_else(|| file.get_path("train_labels"));
    resolve(Split::Train, csv, images, labels, label_column(args, file)?, data_dir(args, file))
}

pub fn test_source(
    args: &TestDataArgs,
    shared: &TrainDataArgs,
    file: &ConfigFile,
) -> Result<Source, CliError> {
    let csv = args.test_csv.clone().or_else(|| file.get_path("test_csv"));
    let images = args.test_images.clone().or_else(|| file.get_path("test_images"));
    let labels = args.test_labels.clone().or_else(|| file.get_path("test_labels"));
    resolve(Split::Test, csv, images, labels, label_column(shared, file)?, data_dir(shared, file))
}

pub fn load(source: &Source) -> Result<Dataset<f64>, CliError> {
    match source {
        Source::Idx { images, labels } => {
            Dataset::from_idx_files(images, labels).map_err(runtime)
        }
        Source::Csv { path, label_column } => {
            load_csv_path(path, label_column).map_err(runtime)
        }
    }
}

pub fn label_column(args: &TrainDataArgs, file: &ConfigFile) -> Result<LabelColumn, CliError> {
    let raw = match &args.label_column {
        Some(value) => Some(value.clone()),
        None => file.get("label_column")?,
    };
    Ok(raw.as_deref().unwrap_or("label").parse().expect("LabelColumn parsing is infallible"))
}

fn data_dir(args: &TrainDataArgs, file: &ConfigFile) -> Option<PathBuf> {
    args.data_dir
        .clone()
        .or_else(|| file.get_path("data_dir"))
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

fn resolve(
    split: Split,
    csv: Option<PathBuf>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    label_column: LabelColumn,
    data_dir: Option<PathBuf>,
) -> Result<Source, CliError> {
    if let Some(path) = csv {
        return Ok(Source::Csv { path, label_column });
    }
    match (images, labels) {
        (Some(images), Some(labels)) => return Ok(Source::Idx { images, labels }),
        (Some(_), None) | (None, Some(_)) => {
            return Err(usage(format!(
                "{} IDX images and labels must be given together",
                split.name()
            )))
        }
        (None, None) => {}
    }
    if let Some(dir) = data_dir {
        let (image_name, label_name) = split.idx_names();
        return Ok(Source::Idx {
            images: find_idx(&dir, image_name)?,
            labels: find_idx(&dir, label_name)?,
        });
    }
    let prefix = split.flag_prefix();
    Err(usage(format!(
        "no {} data: pass --{prefix}-images/--{prefix}-labels, --{prefix}-csv, \
         or --data-dir (or set {DATA_DIR_ENV})",
        split.name(),
    )))
}

fn find_idx(dir: &Path, base_name: &str) -> Result<PathBuf, CliError> {
    let plain = dir.join(base_name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{base_name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(runtime(format!(
        "neither {base_name} nor {base_name}.gz found in {}",
        dir.display()
    )))
}
