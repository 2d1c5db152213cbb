//! Labeled datasets: IDX (MNIST) binary parsing, CSV loading, binarization.

mod csv_io;
mod idx;

pub use csv_io::{load_csv, load_csv_path, LabelColumn};
pub use idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels};

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Real;

/// Integer category identifier (0–9 for MNIST).
pub type Label = u32;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("wrong magic number: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic { expected: u32, found: u32 },
    #[error("truncated stream: need {needed} bytes, got {got}")]
    TruncatedStream { needed: usize, got: usize },
    #[error("zero {0} in IDX header")]
    ZeroDimension(&'static str),
    #[error("{0} trailing bytes after declared payload")]
    TrailingBytes(usize),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("non-numeric feature {value:?} at row {row}, column {column}")]
    NonNumericFeature { row: usize, column: usize, value: String },
    #[error("negative feature {value} at row {row}, column {column}")]
    NegativeFeature { row: usize, column: usize, value: f64 },
    #[error("label column {0:?} not found")]
    LabelColumnNotFound(String),
    #[error("label {value:?} at row {row} is not a non-negative integer")]
    InvalidLabel { row: usize, value: String },
    #[error("count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("sample {index} has dimension {found}, expected {expected}")]
    InconsistentDimension { index: usize, expected: usize, found: usize },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("gzip: {0}")]
    Gzip(std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One labeled sample: a dense non-negative feature vector plus its category.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample<T> {
    pub features: Vec<T>,
    pub label: Label,
}

impl<T: Real> RawSample<T> {
    pub fn new(features: Vec<T>, label: Label) -> Self {
        Self { features, label }
    }

    /// Presence indicator: each feature maps to 1 if it is > 0, else 0.
    /// Idempotent; the label is unchanged.
    pub fn binarized(&self) -> Self {
        Self {
            features: self
                .features
                .iter()
                .map(|&x| if x > T::zero() { T::one() } else { T::zero() })
                .collect(),
            label: self.label,
        }
    }
}

/// An immutable collection of samples sharing one feature dimension.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    samples: Vec<RawSample<T>>,
    dimension: usize,
    categories: BTreeSet<Label>,
}

impl<T: Real> Dataset<T> {
    /// Validates dimension consistency and non-negativity, and records the
    /// set of observed labels.
    pub fn from_samples(samples: Vec<RawSample<T>>) -> Result<Self, DatasetError> {
        let dimension = samples.first().ok_or(DatasetError::EmptyDataset)?.features.len();
        let mut categories = BTreeSet::new();
        for (index, sample) in samples.iter().enumerate() {
            if sample.features.len() != dimension {
                return Err(DatasetError::InconsistentDimension {
                    index,
                    expected: dimension,
                    found: sample.features.len(),
                });
            }
            for (column, &value) in sample.features.iter().enumerate() {
                if !(value >= T::zero()) {
                    return Err(DatasetError::NegativeFeature {
                        row: index,
                        column,
                        value: value.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            categories.insert(sample.label);
        }
        Ok(Self { samples, dimension, categories })
    }

    /// Pairs an IDX image stream with an IDX label stream.
    pub fn from_idx_bytes(images: &[u8], labels: &[u8]) -> Result<Self, DatasetError> {
        let vectors = parse_idx_images::<T>(images)?;
        let labels = parse_idx_labels(labels)?;
        if vectors.len() != labels.len() {
            return Err(DatasetError::CountMismatch {
                images: vectors.len(),
                labels: labels.len(),
            });
        }
        let samples = vectors
            .into_iter()
            .zip(labels)
            .map(|(features, label)| RawSample::new(features, Label::from(label)))
            .collect();
        Self::from_samples(samples)
    }

    /// Reads an IDX image/label file pair; both may be gzip-compressed.
    pub fn from_idx_files(
        images: impl AsRef<Path>,
        labels: impl AsRef<Path>,
    ) -> Result<Self, DatasetError> {
        let image_bytes = read_file(images.as_ref())?;
        let label_bytes = read_file(labels.as_ref())?;
        Self::from_idx_bytes(&image_bytes, &label_bytes)
    }

    pub fn samples(&self) -> &[RawSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Distinct labels actually observed, ascending.
    pub fn categories(&self) -> &BTreeSet<Label> {
        &self.categories
    }

    pub fn contains_category(&self, label: Label) -> bool {
        self.categories.contains(&label)
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Dataset with every sample binarized to presence indicators.
    pub fn binarized(&self) -> Self {
        Self {
            samples: self.samples.iter().map(RawSample::binarized).collect(),
            dimension: self.dimension,
            categories: self.categories.clone(),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize_maps_positive_values_to_one() {
        let sample = RawSample::new(vec![0.0, 3.0, 0.0, 255.0], 7);
        let binary = sample.binarized();
        assert_eq!(binary.features, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(binary.label, 7);
    }

    #[test]
    fn binarize_fixes_zero_vector_and_is_idempotent() {
        let zero = RawSample::new(vec![0.0; 4], 1);
        assert_eq!(zero.binarized(), zero);

        let already = RawSample::new(vec![1.0, 0.0, 1.0], 2);
        assert_eq!(already.binarized(), already);

        let sample = RawSample::new(vec![0.5, 0.0, 9.0], 3);
        assert_eq!(sample.binarized().binarized(), sample.binarized());
    }

    #[test]
    fn from_samples_tracks_observed_categories() {
        let dataset = Dataset::from_samples(vec![
            RawSample::new(vec![1.0, 0.0], 4),
            RawSample::new(vec![0.0, 2.0], 1),
            RawSample::new(vec![0.0, 0.0], 4),
        ])
        .unwrap();
        assert_eq!(dataset.dimension(), 2);
        assert_eq!(dataset.len(), 3);
        let got: Vec<Label> = dataset.categories().iter().copied().collect();
        assert_eq!(got, vec![1, 4]);
        assert_eq!(dataset.count_label(4), 2);
    }

    #[test]
    fn from_samples_rejects_empty_and_inconsistent_input() {
        assert!(matches!(
            Dataset::<f64>::from_samples(vec![]),
            Err(DatasetError::EmptyDataset)
        ));
        let err = Dataset::from_samples(vec![
            RawSample::new(vec![1.0, 2.0], 0),
            RawSample::new(vec![1.0], 0),
        ])
        .unwrap_err();
        assert!(matches!(err, DatasetError::InconsistentDimension { index: 1, .. }));
    }

    #[test]
    fn from_samples_rejects_negative_features() {
        let err =
            Dataset::from_samples(vec![RawSample::new(vec![1.0, -0.5], 0)]).unwrap_err();
        assert!(matches!(err, DatasetError::NegativeFeature { column: 1, .. }));
    }
}
