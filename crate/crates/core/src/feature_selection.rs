//! Chi-square feature ranking and top-k selection.
//!
//! Each feature is scored by the chi-square statistic of the 2×2 contingency
//! table (feature non-zero?) × (label == positive category?). Presence always
//! means "value > 0", independent of whether downstream classification uses
//! raw or binarized features.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Label, RawSample};
use crate::jsonfmt;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("feature index {feature} out of range for dimension {dimension}")]
    FeatureIndexOutOfRange { feature: usize, dimension: usize },
    #[error("k = {k} out of range 1..={dimension}")]
    KOutOfRange { k: usize, dimension: usize },
    #[error("mask needs dimension >= {needed}, sample has {found}")]
    DimensionMismatch { needed: usize, found: usize },
    #[error("invalid feature mask: {0}")]
    InvalidMask(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("mask json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Top-k selected feature indices with their scores, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMask<T> {
    indices: Vec<usize>,
    scores: Vec<T>,
}

impl<T: Real> FeatureMask<T> {
    /// Indices are distinct and ordered by non-increasing score (ties by
    /// ascending index, so lower indices come first).
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Restricts a sample to the selected indices, in mask order.
    pub fn apply(&self, sample: &RawSample<T>) -> Result<RawSample<T>, SelectionError> {
        Ok(RawSample::new(self.apply_to_features(&sample.features)?, sample.label))
    }

    pub fn apply_to_features(&self, features: &[T]) -> Result<Vec<T>, SelectionError> {
        let needed = self.indices.iter().max().map_or(0, |&i| i + 1);
        if features.len() < needed {
            return Err(SelectionError::DimensionMismatch { needed, found: features.len() });
        }
        Ok(self.indices.iter().map(|&i| features[i]).collect())
    }

    /// Serializes as `{"k": .., "indices": [..], "scores": [..]}`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SelectionError> {
        let path = path.as_ref();
        let wire = MaskFile {
            k: self.indices.len(),
            indices: self.indices.clone(),
            scores: self.scores.iter().map(|s| s.to_f64().unwrap_or(f64::NAN)).collect(),
        };
        jsonfmt::write_json_file(path, &wire).map_err(|source| SelectionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SelectionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SelectionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let wire: MaskFile = serde_json::from_str(&text)?;
        Self::from_parts(
            wire.indices,
            wire.scores.into_iter().map(T::from_f64_lossy).collect(),
            wire.k,
        )
    }

    pub(crate) fn from_parts(
        indices: Vec<usize>,
        scores: Vec<T>,
        k: usize,
    ) -> Result<Self, SelectionError> {
        if indices.len() != k || scores.len() != k {
            return Err(SelectionError::InvalidMask(format!(
                "k = {k} but {} indices and {} scores",
                indices.len(),
                scores.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &index in &indices {
            if !seen.insert(index) {
                return Err(SelectionError::InvalidMask(format!("duplicate index {index}")));
            }
        }
        for pair in scores.windows(2) {
            if pair[1] > pair[0] {
                return Err(SelectionError::InvalidMask("scores increase".into()));
            }
        }
        Ok(Self { indices, scores })
    }
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    k: usize,
    indices: Vec<usize>,
    scores: Vec<f64>,
}

/// Chi-square statistic `N·(AD−CB)² / ((A+C)(B+D)(A+B)(C+D))` of the feature's
/// presence against membership in `positive_label`. Returns 0 whenever a
/// marginal is zero (constant feature or single-class data).
pub fn chi_square_score<T: Real>(
    dataset: &Dataset<T>,
    feature: usize,
    positive_label: Label,
) -> Result<T, SelectionError> {
    if feature >= dataset.dimension() {
        return Err(SelectionError::FeatureIndexOutOfRange {
            feature,
            dimension: dataset.dimension(),
        });
    }
    let mut present_positive = 0u64;
    let mut present_negative = 0u64;
    let mut absent_positive = 0u64;
    let mut absent_negative = 0u64;
    for sample in dataset.samples() {
        let present = sample.features[feature] > T::zero();
        let positive = sample.label == positive_label;
        match (present, positive) {
            (true, true) => present_positive += 1,
            (true, false) => present_negative += 1,
            (false, true) => absent_positive += 1,
            (false, false) => absent_negative += 1,
        }
    }
    Ok(chi_square_from_counts(
        present_positive,
        present_negative,
        absent_positive,
        absent_negative,
    ))
}

/// Shared 2×2 table evaluation; the order of operations is fixed so that the
/// per-feature path and the batched path produce identical floats.
fn chi_square_from_counts<T: Real>(a: u64, b: u64, c: u64, d: u64) -> T {
    let positive = a + c;
    let negative = b + d;
    let present = a + b;
    let absent = c + d;
    if positive == 0 || negative == 0 || present == 0 || absent == 0 {
        return T::zero();
    }
    let to_t = |count: u64| T::from_u64(count).expect("count fits Real");
    let diff = to_t(a) * to_t(d) - to_t(c) * to_t(b);
    let total = to_t(a + b + c + d);
    total * diff * diff / (to_t(positive) * to_t(negative) * to_t(present) * to_t(absent))
}

/// Per-category presence counts, shared by the selection entry points.
struct PresenceTable {
    per_category: BTreeMap<Label, Vec<u64>>,
    category_sizes: BTreeMap<Label, u64>,
    present_total: Vec<u64>,
    total: u64,
}

impl PresenceTable {
    fn build<T: Real>(dataset: &Dataset<T>, rows: Option<&[usize]>) -> Self {
        let dimension = dataset.dimension();
        let mut per_category: BTreeMap<Label, Vec<u64>> = dataset
            .categories()
            .iter()
            .map(|&label| (label, vec![0u64; dimension]))
            .collect();
        let mut category_sizes: BTreeMap<Label, u64> =
            dataset.categories().iter().map(|&label| (label, 0u64)).collect();
        let mut present_total = vec![0u64; dimension];
        let mut total = 0u64;
        let samples: Box<dyn Iterator<Item = &RawSample<T>>> = match rows {
            Some(rows) => Box::new(rows.iter().map(|&row| &dataset.samples()[row])),
            None => Box::new(dataset.samples().iter()),
        };
        for sample in samples {
            let counts = per_category.get_mut(&sample.label).expect("observed label");
            *category_sizes.get_mut(&sample.label).expect("observed label") += 1;
            total += 1;
            for (feature, &value) in sample.features.iter().enumerate() {
                if value > T::zero() {
                    counts[feature] += 1;
                    present_total[feature] += 1;
                }
            }
        }
        Self { per_category, category_sizes, present_total, total }
    }

    fn score<T: Real>(&self, feature: usize, category: Label) -> T {
        let a = self.per_category[&category][feature];
        let b = self.present_total[feature] - a;
        let c = self.category_sizes[&category] - a;
        let d = self.total - self.category_sizes[&category] - b;
        chi_square_from_counts(a, b, c, d)
    }
}

/// Selects the k features with the highest aggregate score, where the
/// aggregate is the max of the per-category chi-square scores. Ties are broken
/// by the lower feature index, so `select_top_k(k1)` is a prefix of
/// `select_top_k(k2)` for `k1 <= k2`.
pub fn select_top_k<T: Real>(
    dataset: &Dataset<T>,
    k: usize,
) -> Result<FeatureMask<T>, SelectionError> {
    select_ranked(dataset, k, None, None)
}

/// Same selection, but ranked by a single category's score instead of the
/// max-over-categories aggregate.
pub fn select_top_k_for_category<T: Real>(
    dataset: &Dataset<T>,
    k: usize,
    category: Label,
) -> Result<FeatureMask<T>, SelectionError> {
    select_ranked(dataset, k, Some(category), None)
}

/// [`select_top_k`] restricted to a row subset, so cross-validation folds can
/// rank features without seeing their validation rows.
pub fn select_top_k_within<T: Real>(
    dataset: &Dataset<T>,
    rows: &[usize],
    k: usize,
) -> Result<FeatureMask<T>, SelectionError> {
    select_ranked(dataset, k, None, Some(rows))
}

/// [`select_top_k_for_category`] restricted to a row subset.
pub fn select_top_k_for_category_within<T: Real>(
    dataset: &Dataset<T>,
    rows: &[usize],
    k: usize,
    category: Label,
) -> Result<FeatureMask<T>, SelectionError> {
    select_ranked(dataset, k, Some(category), Some(rows))
}

fn select_ranked<T: Real>(
    dataset: &Dataset<T>,
    k: usize,
    category: Option<Label>,
    rows: Option<&[usize]>,
) -> Result<FeatureMask<T>, SelectionError> {
    let dimension = dataset.dimension();
    if k == 0 || k > dimension {
        return Err(SelectionError::KOutOfRange { k, dimension });
    }
    let table = PresenceTable::build(dataset, rows);
    let scores: Vec<T> = (0..dimension)
        .map(|feature| match category {
            Some(label) => table.score(feature, label),
            None => dataset
                .categories()
                .iter()
                .map(|&label| table.score::<T>(feature, label))
                .fold(T::zero(), T::max),
        })
        .collect();
    let mut order: Vec<usize> = (0..dimension).collect();
    order.sort_by(|&i, &j| {
        scores[j].partial_cmp(&scores[i]).expect("finite scores").then(i.cmp(&j))
    });
    order.truncate(k);
    let selected_scores = order.iter().map(|&i| scores[i]).collect();
    FeatureMask::from_parts(order, selected_scores, k)
}
