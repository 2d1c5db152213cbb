//! One-vs-all benchmark orchestration: fold splitting, confusion metrics,
//! baseline hyperparameter selection, and the end-to-end experiment over a
//! train/test dataset pair.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{BaselineError, BernoulliNbModel, KnnIndex, KnnModel};
use crate::dataset::{Dataset, Label, RawSample};
use crate::feature_selection::{
    select_top_k, select_top_k_for_category, select_top_k_for_category_within,
    select_top_k_within, FeatureMask, SelectionError,
};
use crate::linalg::norm;
use crate::quantum::{DecisionConfig, QuantumError, TrainedDetector};
use crate::report::{EvaluationReport, ReportMetadata, ReportRow};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("category {0} is not present in the training data")]
    UnknownCategory(Label),
    #[error("need at least {folds} samples for {folds}-fold splitting, got {n}")]
    TooFewSamples { n: usize, folds: usize },
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("no samples to evaluate")]
    EmptyEvaluation,
    #[error("no models requested")]
    NoModels,
    #[error("no categories requested")]
    NoCategories,
    #[error("train dimension {train} does not match test dimension {test}")]
    DimensionMismatch { train: usize, test: usize },
    #[error("category {category}, model {model}: {source}")]
    Cell {
        category: Label,
        model: ModelKind,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

fn cell_error(
    category: Label,
    model: ModelKind,
    source: impl std::error::Error + Send + Sync + 'static,
) -> EvaluationError {
    EvaluationError::Cell { category, model, source: Box::new(source) }
}

/// The classifiers the benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bciqt,
    Knn,
    Nb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Bciqt, ModelKind::Knn, ModelKind::Nb];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bciqt => "bciqt",
            ModelKind::Knn => "knn",
            ModelKind::Nb => "nb",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bciqt" => Ok(ModelKind::Bciqt),
            "knn" => Ok(ModelKind::Knn),
            "nb" => Ok(ModelKind::Nb),
            other => Err(format!("unknown model '{other}' (expected bciqt, knn, or nb)")),
        }
    }
}

/// Binary confusion counts of one evaluated cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.true_positive += 1,
            (false, true) => self.false_positive += 1,
            (false, false) => self.true_negative += 1,
            (true, false) => self.false_negative += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut counts = Self::default();
        for (truth, predicted) in pairs {
            counts.record(truth, predicted);
        }
        counts
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    pub recall: T,
    pub precision: T,
    pub accuracy: T,
    pub f1: T,
}

/// Derives recall, precision, accuracy, and F1 from confusion counts, with
/// every 0/0 ratio defined as 0.
pub fn compute_metrics<T: Real>(counts: &ConfusionCounts) -> Result<Metrics<T>, EvaluationError> {
    if counts.total() == 0 {
        return Err(EvaluationError::EmptyEvaluation);
    }
    let ratio = |numerator: u64, denominator: u64| -> T {
        if denominator == 0 {
            T::zero()
        } else {
            T::from_u64(numerator).expect("count fits Real")
                / T::from_u64(denominator).expect("count fits Real")
        }
    };
    let recall = ratio(counts.true_positive, counts.true_positive + counts.false_negative);
    let precision = ratio(counts.true_positive, counts.true_positive + counts.false_positive);
    let accuracy = ratio(counts.true_positive + counts.true_negative, counts.total());
    let f1 = if (precision + recall) > T::zero() {
        T::from_f64_lossy(2.0) * precision * recall / (precision + recall)
    } else {
        T::zero()
    };
    Ok(Metrics { recall, precision, accuracy, f1 })
}

/// Partitions a dataset into samples of `category` and everything else.
pub fn one_vs_all_split<T: Real>(
    dataset: &Dataset<T>,
    category: Label,
) -> Result<(Vec<&RawSample<T>>, Vec<&RawSample<T>>), EvaluationError> {
    if !dataset.contains_category(category) {
        return Err(EvaluationError::UnknownCategory(category));
    }
    Ok(dataset.samples().iter().partition(|sample| sample.label == category))
}

/// Seeded k-fold split of `0..n`. Validation folds have ⌊n/folds⌋ indices,
/// the first `n mod folds` of them one more; both index lists are ascending,
/// and the shuffle only decides membership.
pub fn k_fold_indices(
    n: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, EvaluationError> {
    if folds < 2 {
        return Err(EvaluationError::TooFewFolds(folds));
    }
    if n < folds {
        return Err(EvaluationError::TooFewSamples { n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / folds;
    let remainder = n % folds;
    let mut splits = Vec::with_capacity(folds);
    let mut start = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < remainder);
        let mut validation: Vec<usize> = order[start..start + size].to_vec();
        validation.sort_unstable();
        let mut in_validation = vec![false; n];
        for &index in &validation {
            in_validation[index] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&index| !in_validation[index]).collect();
        splits.push((train, validation));
        start += size;
    }
    Ok(splits)
}

/// How the feature mask is shared across the one-vs-all problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// One mask ranked by the max of the per-category scores, shared by all
    /// categories and models.
    SharedMax,
    /// A separate mask per category, ranked by that category's scores.
    PerCategory,
}

/// Which rows feature selection may see during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    /// Select once on the full training set and reuse the mask in every fold.
    FullTrainingSet,
    /// Re-select inside each fold from its training rows only.
    PerFold,
}

/// Benchmark configuration. The defaults reproduce the reference experiment:
/// top 100 features, λ = 1, threshold 0.5, 5 folds, categories 0 through 8,
/// binarized test vectors, one shared mask selected on the full training set.
#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub models: Vec<ModelKind>,
    pub categories: Vec<Label>,
    pub top_k: usize,
    pub decision: DecisionConfig<T>,
    pub folds: usize,
    pub seed: u64,
    pub binarize_tests: bool,
    pub mask_mode: MaskMode,
    pub selection_scope: SelectionScope,
    /// Overrides cross-validated neighbor selection with a fixed k.
    pub knn_k: Option<usize>,
    /// Candidate neighbor counts scored by cross-validation.
    pub knn_candidates: Vec<usize>,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            categories: (0..=8).collect(),
            top_k: 100,
            decision: DecisionConfig::default(),
            folds: 5,
            seed: 42,
            binarize_tests: true,
            mask_mode: MaskMode::SharedMax,
            selection_scope: SelectionScope::FullTrainingSet,
            knn_k: None,
            knn_candidates: vec![1, 3, 5, 7, 9],
        }
    }
}

impl<T: Real> ExperimentConfig<T> {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        if self.models.is_empty() {
            return Err(EvaluationError::NoModels);
        }
        if self.categories.is_empty() {
            return Err(EvaluationError::NoCategories);
        }
        self.decision.clone().validated()?;
        Ok(())
    }

    fn sorted_categories(&self) -> Vec<Label> {
        self.categories.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn sorted_models(&self) -> Vec<ModelKind> {
        self.models.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn wants(&self, kind: ModelKind) -> bool {
        self.models.contains(&kind)
    }
}

/// Feature rows restricted to a mask, stored contiguously.
struct MaskedMatrix<T> {
    data: Vec<T>,
    width: usize,
}

impl<T: Real> MaskedMatrix<T> {
    fn build(samples: &[RawSample<T>], mask: &FeatureMask<T>, binarize: bool) -> Self {
        Self::build_rows_inner(samples, None, mask, binarize)
    }

    fn build_rows(
        samples: &[RawSample<T>],
        rows: &[usize],
        mask: &FeatureMask<T>,
        binarize: bool,
    ) -> Self {
        Self::build_rows_inner(samples, Some(rows), mask, binarize)
    }

    fn build_rows_inner(
        samples: &[RawSample<T>],
        rows: Option<&[usize]>,
        mask: &FeatureMask<T>,
        binarize: bool,
    ) -> Self {
        let width = mask.len();
        let count = rows.map_or(samples.len(), <[usize]>::len);
        let mut data = Vec::with_capacity(count * width);
        let mut push_row = |sample: &RawSample<T>| {
            for &index in mask.indices() {
                let value = sample.features[index];
                data.push(if binarize {
                    if value > T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    }
                } else {
                    value
                });
            }
        };
        match rows {
            Some(rows) => rows.iter().for_each(|&row| push_row(&samples[row])),
            None => samples.iter().for_each(&mut push_row),
        }
        Self { data, width }
    }

    fn len(&self) -> usize {
        self.data.len() / self.width
    }

    fn row(&self, index: usize) -> &[T] {
        &self.data[index * self.width..(index + 1) * self.width]
    }

    fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.width)
    }
}

/// Everything fitted on the training set, ready to be applied to held-out
/// samples or serialized.
pub struct ExperimentModels<T> {
    dimension: usize,
    mask_mode: MaskMode,
    models: Vec<ModelKind>,
    categories: Vec<Label>,
    masks: BTreeMap<Label, FeatureMask<T>>,
    detectors: BTreeMap<Label, TrainedDetector<T>>,
    nb_models: BTreeMap<Label, BernoulliNbModel<T>>,
    knn_models: BTreeMap<Label, KnnModel>,
    knn_k: BTreeMap<Label, usize>,
    degenerate_categories: Vec<Label>,
}

impl<T: Real> ExperimentModels<T> {
    pub fn categories(&self) -> &[Label] {
        &self.categories
    }

    pub fn models(&self) -> &[ModelKind] {
        &self.models
    }

    pub fn mask_mode(&self) -> MaskMode {
        self.mask_mode
    }

    pub fn mask(&self, category: Label) -> Option<&FeatureMask<T>> {
        self.masks.get(&category)
    }

    pub fn detector(&self, category: Label) -> Option<&TrainedDetector<T>> {
        self.detectors.get(&category)
    }

    pub fn nb_model(&self, category: Label) -> Option<&BernoulliNbModel<T>> {
        self.nb_models.get(&category)
    }

    pub fn chosen_knn_k(&self) -> &BTreeMap<Label, usize> {
        &self.knn_k
    }

    pub fn degenerate_categories(&self) -> &[Label] {
        &self.degenerate_categories
    }

    /// Category groups that share one mask: a single group in shared-mask
    /// mode, one group per category otherwise.
    fn mask_groups(&self) -> Vec<(&FeatureMask<T>, Vec<Label>)> {
        group_by_mask(&self.masks, self.mask_mode, &self.categories)
    }
}

fn group_by_mask<'a, T>(
    masks: &'a BTreeMap<Label, FeatureMask<T>>,
    mask_mode: MaskMode,
    categories: &[Label],
) -> Vec<(&'a FeatureMask<T>, Vec<Label>)> {
    match mask_mode {
        MaskMode::SharedMax => {
            let mask = masks.values().next().expect("at least one category");
            vec![(mask, categories.to_vec())]
        }
        MaskMode::PerCategory => {
            categories.iter().map(|&category| (&masks[&category], vec![category])).collect()
        }
    }
}

/// Selects features and fits every requested (category, model) cell on the
/// training set. Cross-validation is used only to choose KNN's k.
pub fn train_models<T: Real>(
    train: &Dataset<T>,
    config: &ExperimentConfig<T>,
) -> Result<ExperimentModels<T>, EvaluationError> {
    config.validate()?;
    let categories = config.sorted_categories();
    for &category in &categories {
        if !train.contains_category(category) {
            return Err(EvaluationError::UnknownCategory(category));
        }
    }
    let labels: Vec<Label> = train.samples().iter().map(|sample| sample.label).collect();

    let mut masks = BTreeMap::new();
    for &category in &categories {
        let mask = match config.mask_mode {
            MaskMode::SharedMax => match masks.values().next() {
                Some(existing) => FeatureMask::clone(existing),
                None => select_top_k(train, config.top_k)?,
            },
            MaskMode::PerCategory => select_top_k_for_category(train, config.top_k, category)?,
        };
        masks.insert(category, mask);
    }

    let knn_k: BTreeMap<Label, usize> = if config.wants(ModelKind::Knn) {
        match config.knn_k {
            Some(k) => {
                if k == 0 || k % 2 == 0 || k > train.len() {
                    return Err(BaselineError::InvalidNeighborCount { k, n: train.len() }.into());
                }
                categories.iter().map(|&category| (category, k)).collect()
            }
            None => choose_knn_k(train, &labels, &masks, &categories, config)?,
        }
    } else {
        BTreeMap::new()
    };

    let mut detectors = BTreeMap::new();
    let mut nb_models = BTreeMap::new();
    let mut knn_models = BTreeMap::new();
    let mut degenerate_categories = Vec::new();

    for (mask, group) in group_by_mask(&masks, config.mask_mode, &categories) {
        let matrix = MaskedMatrix::build(train.samples(), mask, false);

        if config.wants(ModelKind::Bciqt) {
            for &category in &group {
                let detector = fit_detector(&matrix, &labels, category, mask, &config.decision)
                    .map_err(|source| cell_error(category, ModelKind::Bciqt, source))?;
                if detector.projector().is_degenerate() {
                    degenerate_categories.push(category);
                }
                detectors.insert(category, detector);
            }
        }
        if config.wants(ModelKind::Nb) {
            for &category in &group {
                let positives = matrix
                    .rows()
                    .zip(&labels)
                    .filter(|&(_, &label)| label == category)
                    .map(|(row, _)| row);
                let negatives = matrix
                    .rows()
                    .zip(&labels)
                    .filter(|&(_, &label)| label != category)
                    .map(|(row, _)| row);
                let model = BernoulliNbModel::train(positives, negatives)
                    .map_err(|source| cell_error(category, ModelKind::Nb, source))?;
                nb_models.insert(category, model);
            }
        }
        if config.wants(ModelKind::Knn) {
            let index = Arc::new(KnnIndex::build(matrix.rows())?);
            for &category in &group {
                let is_positive: Vec<bool> =
                    labels.iter().map(|&label| label == category).collect();
                let model = KnnModel::from_index(Arc::clone(&index), is_positive, knn_k[&category])
                    .map_err(|source| cell_error(category, ModelKind::Knn, source))?;
                knn_models.insert(category, model);
            }
        }
    }

    Ok(ExperimentModels {
        dimension: train.dimension(),
        mask_mode: config.mask_mode,
        models: config.sorted_models(),
        categories,
        masks,
        detectors,
        nb_models,
        knn_models,
        knn_k,
        degenerate_categories,
    })
}

fn fit_detector<T: Real>(
    matrix: &MaskedMatrix<T>,
    labels: &[Label],
    category: Label,
    mask: &FeatureMask<T>,
    decision: &DecisionConfig<T>,
) -> Result<TrainedDetector<T>, QuantumError> {
    let mut positive_counts = vec![0u64; matrix.width];
    let mut negative_counts = vec![0u64; matrix.width];
    let mut positive_n = 0usize;
    let mut negative_n = 0usize;
    for (row, &label) in matrix.rows().zip(labels) {
        let (counts, n) = if label == category {
            (&mut positive_counts, &mut positive_n)
        } else {
            (&mut negative_counts, &mut negative_n)
        };
        *n += 1;
        for (count, &value) in counts.iter_mut().zip(row) {
            if value > T::zero() {
                *count += 1;
            }
        }
    }
    let positive_stats = crate::quantum::ClassStatVector::from_counts(&positive_counts, positive_n)?;
    let negative_stats = crate::quantum::ClassStatVector::from_counts(&negative_counts, negative_n)?;
    TrainedDetector::from_stats(
        category,
        &positive_stats,
        &negative_stats,
        mask.indices().to_vec(),
        decision,
    )
}

/// Picks each category's neighbor count by seeded cross-validation on the
/// training set, maximizing mean validation F1 (ties go to the smaller k).
/// Neighbor tables are shared across candidate ks and, in shared-mask mode,
/// across categories.
fn choose_knn_k<T: Real>(
    train: &Dataset<T>,
    labels: &[Label],
    masks: &BTreeMap<Label, FeatureMask<T>>,
    categories: &[Label],
    config: &ExperimentConfig<T>,
) -> Result<BTreeMap<Label, usize>, EvaluationError> {
    let folds = k_fold_indices(train.len(), config.folds, config.seed)?;
    let smallest_fold_train =
        folds.iter().map(|(train_rows, _)| train_rows.len()).min().expect("folds >= 2");
    let candidates: Vec<usize> = config
        .knn_candidates
        .iter()
        .copied()
        .filter(|&k| k >= 1 && k <= smallest_fold_train)
        .collect();
    if candidates.is_empty() || candidates.iter().any(|&k| k % 2 == 0) {
        return Err(BaselineError::InvalidNeighborCount {
            k: config.knn_candidates.first().copied().unwrap_or(0),
            n: smallest_fold_train,
        }
        .into());
    }
    let widest = *candidates.iter().max().expect("non-empty");

    let mut f1_sums: BTreeMap<Label, Vec<f64>> =
        categories.iter().map(|&category| (category, vec![0.0; candidates.len()])).collect();

    for (train_rows, validation_rows) in &folds {
        let fold_groups: Vec<(FeatureMask<T>, Vec<Label>)> = match config.selection_scope {
            SelectionScope::FullTrainingSet => {
                group_by_mask(masks, config.mask_mode, categories)
                    .into_iter()
                    .map(|(mask, group)| (mask.clone(), group))
                    .collect()
            }
            SelectionScope::PerFold => match config.mask_mode {
                MaskMode::SharedMax => {
                    vec![(select_top_k_within(train, train_rows, config.top_k)?, categories.to_vec())]
                }
                MaskMode::PerCategory => categories
                    .iter()
                    .map(|&category| {
                        select_top_k_for_category_within(train, train_rows, config.top_k, category)
                            .map(|mask| (mask, vec![category]))
                    })
                    .collect::<Result<_, _>>()?,
            },
        };

        for (mask, group) in &fold_groups {
            let fold_matrix = MaskedMatrix::build_rows(train.samples(), train_rows, mask, false);
            let index = KnnIndex::build(fold_matrix.rows())?;
            let tables: Vec<Vec<usize>> = validation_rows
                .par_iter()
                .map(|&row| {
                    let masked = mask
                        .apply_to_features(&train.samples()[row].features)
                        .expect("mask fits the training dimension");
                    let query = index.pack_query(&masked).expect("same mask width");
                    index.nearest(&query, widest)
                })
                .collect();

            for &category in group {
                let sums = f1_sums.get_mut(&category).expect("initialized above");
                for (slot, &k) in candidates.iter().enumerate() {
                    let mut counts = ConfusionCounts::default();
                    for (table, &row) in tables.iter().zip(validation_rows) {
                        let votes = table[..k]
                            .iter()
                            .filter(|&&neighbor| labels[train_rows[neighbor]] == category)
                            .count();
                        counts.record(labels[row] == category, 2 * votes > k);
                    }
                    sums[slot] += compute_metrics::<f64>(&counts)?.f1;
                }
            }
        }
    }

    Ok(f1_sums
        .into_iter()
        .map(|(category, sums)| {
            let mut best = 0;
            for slot in 1..sums.len() {
                if sums[slot] > sums[best] {
                    best = slot;
                }
            }
            (category, candidates[best])
        })
        .collect())
}

/// Applies fitted models to a held-out test set and assembles the report.
pub fn evaluate_models<T: Real>(
    models: &ExperimentModels<T>,
    test: &Dataset<T>,
    config: &ExperimentConfig<T>,
) -> Result<EvaluationReport, EvaluationError> {
    if test.dimension() != models.dimension {
        return Err(EvaluationError::DimensionMismatch {
            train: models.dimension,
            test: test.dimension(),
        });
    }
    let truth_labels: Vec<Label> = test.samples().iter().map(|sample| sample.label).collect();
    let mut cells: BTreeMap<(Label, ModelKind), ConfusionCounts> = BTreeMap::new();
    let mut zero_test_vectors: BTreeMap<Label, u64> = BTreeMap::new();

    for (mask, group) in models.mask_groups() {
        let matrix = MaskedMatrix::build(test.samples(), mask, config.binarize_tests);
        let zero_rows = matrix.rows().filter(|row| !(norm(row) > T::zero())).count() as u64;
        for &category in &group {
            zero_test_vectors.insert(category, zero_rows);
        }

        for &category in &group {
            if let Some(detector) = models.detectors.get(&category) {
                let mut counts = ConfusionCounts::default();
                for (row, &label) in matrix.rows().zip(&truth_labels) {
                    let predicted = detector
                        .classify(row)
                        .map_err(|source| cell_error(category, ModelKind::Bciqt, source))?;
                    counts.record(label == category, predicted == 1);
                }
                cells.insert((category, ModelKind::Bciqt), counts);
            }
            if let Some(model) = models.nb_models.get(&category) {
                let mut counts = ConfusionCounts::default();
                for (row, &label) in matrix.rows().zip(&truth_labels) {
                    let predicted = model
                        .classify(row)
                        .map_err(|source| cell_error(category, ModelKind::Nb, source))?;
                    counts.record(label == category, predicted == 1);
                }
                cells.insert((category, ModelKind::Nb), counts);
            }
        }

        let knn_in_group: Vec<Label> = group
            .iter()
            .copied()
            .filter(|category| models.knn_models.contains_key(category))
            .collect();
        if !knn_in_group.is_empty() {
            let widest =
                knn_in_group.iter().map(|category| models.knn_k[category]).max().expect("non-empty");
            let index = models.knn_models[&knn_in_group[0]].index();
            let tables: Vec<Vec<usize>> = (0..matrix.len())
                .into_par_iter()
                .map(|row| {
                    let query = index.pack_query(matrix.row(row)).expect("same mask width");
                    index.nearest(&query, widest)
                })
                .collect();
            for &category in &knn_in_group {
                let model = &models.knn_models[&category];
                let mut counts = ConfusionCounts::default();
                for (table, &label) in tables.iter().zip(&truth_labels) {
                    let predicted = model.classify_from_neighbors(table);
                    counts.record(label == category, predicted == 1);
                }
                cells.insert((category, ModelKind::Knn), counts);
            }
        }
    }

    let zero_total: u64 = zero_test_vectors.values().copied().max().unwrap_or(0);
    if zero_total > 0 {
        log::warn!(
            "{zero_total} test vectors are zero after masking and were classified 0"
        );
    }

    let mut rows = Vec::with_capacity(cells.len());
    for ((category, model), counts) in &cells {
        let metrics = compute_metrics::<f64>(counts)?;
        rows.push(ReportRow {
            category: *category,
            model: *model,
            true_positive: counts.true_positive,
            false_positive: counts.false_positive,
            true_negative: counts.true_negative,
            false_negative: counts.false_negative,
            recall: metrics.recall,
            precision: metrics.precision,
            accuracy: metrics.accuracy,
            f1: metrics.f1,
        });
    }

    let decision = &config.decision;
    let metadata = ReportMetadata {
        top_k: config.top_k,
        lambda: decision.lambda.to_f64().unwrap_or(f64::NAN),
        threshold: decision.threshold.to_f64().unwrap_or(f64::NAN),
        xi: decision.xi.to_f64().unwrap_or(f64::NAN),
        folds: config.folds,
        seed: config.seed,
        binarize_tests: config.binarize_tests,
        mask_mode: models.mask_mode,
        selection_scope: config.selection_scope,
        models: models.models.clone(),
        categories: models.categories.clone(),
        knn_k: models.knn_k.clone(),
        degenerate_categories: models.degenerate_categories.clone(),
        zero_test_vectors,
    };
    Ok(EvaluationReport::new(metadata, rows))
}

/// Fits on `train`, evaluates every (category, model) cell on `test`, and
/// returns the assembled report.
pub fn run_experiment<T: Real>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    config: &ExperimentConfig<T>,
) -> Result<EvaluationReport, EvaluationError> {
    if test.dimension() != train.dimension() {
        return Err(EvaluationError::DimensionMismatch {
            train: train.dimension(),
            test: test.dimension(),
        });
    }
    let models = train_models(train, config)?;
    evaluate_models(&models, test, config)
}
