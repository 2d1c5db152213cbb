//! From-scratch comparison classifiers: Bernoulli naive Bayes and k-nearest
//! neighbors over presence-binarized feature vectors.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::jsonfmt;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("the {0} class has no training samples")]
    EmptyClass(&'static str),
    #[error("expected vectors of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("neighbor count k = {k} must be odd and within 1..={n}")]
    InvalidNeighborCount { k: usize, n: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Bernoulli naive Bayes over presence features, Laplace-smoothed with α = 1.
/// Class index 0 is the negative class, 1 the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliNbModel<T> {
    log_prior: [T; 2],
    log_prob_present: [Vec<T>; 2],
    log_prob_absent: [Vec<T>; 2],
}

impl<T: Real> BernoulliNbModel<T> {
    /// Estimates P(feature present | class) = (count + 1) / (n_class + 2)
    /// and empirical class priors.
    pub fn train<P, N, S, R>(positives: P, negatives: N) -> Result<Self, BaselineError>
    where
        P: IntoIterator<Item = S>,
        S: AsRef<[T]>,
        N: IntoIterator<Item = R>,
        R: AsRef<[T]>,
    {
        let (negative_counts, negative_n) = presence_counts(negatives)?;
        let (positive_counts, positive_n) = presence_counts(positives)?;
        if positive_n == 0 {
            return Err(BaselineError::EmptyClass("positive"));
        }
        if negative_n == 0 {
            return Err(BaselineError::EmptyClass("negative"));
        }
        if positive_counts.len() != negative_counts.len() {
            return Err(BaselineError::DimensionMismatch {
                expected: negative_counts.len(),
                found: positive_counts.len(),
            });
        }

        let total = T::from_usize(positive_n + negative_n).expect("sample count fits Real");
        let prior = |n: usize| (T::from_usize(n).expect("sample count fits Real") / total).ln();
        let smoothed = |counts: &[u64], n: usize| -> (Vec<T>, Vec<T>) {
            let denominator = T::from_usize(n + 2).expect("sample count fits Real");
            counts
                .iter()
                .map(|&count| {
                    let present = T::from_u64(count + 1).expect("count fits Real") / denominator;
                    let absent =
                        T::from_u64(n as u64 - count + 1).expect("count fits Real") / denominator;
                    (present.ln(), absent.ln())
                })
                .unzip()
        };
        let (negative_present, negative_absent) = smoothed(&negative_counts, negative_n);
        let (positive_present, positive_absent) = smoothed(&positive_counts, positive_n);
        Ok(Self {
            log_prior: [prior(negative_n), prior(positive_n)],
            log_prob_present: [negative_present, positive_present],
            log_prob_absent: [negative_absent, positive_absent],
        })
    }

    pub fn dimension(&self) -> usize {
        self.log_prob_present[0].len()
    }

    pub fn log_prior(&self) -> &[T; 2] {
        &self.log_prior
    }

    pub fn log_prob_present(&self) -> &[Vec<T>; 2] {
        &self.log_prob_present
    }

    pub fn log_prob_absent(&self) -> &[Vec<T>; 2] {
        &self.log_prob_absent
    }

    /// Joint log likelihoods log P(class) + Σ_f log P(observation | class),
    /// ordered [negative, positive]. Always finite thanks to smoothing.
    pub fn log_posteriors(&self, w: &[T]) -> Result<[T; 2], BaselineError> {
        if w.len() != self.dimension() {
            return Err(BaselineError::DimensionMismatch {
                expected: self.dimension(),
                found: w.len(),
            });
        }
        let mut posteriors = self.log_prior;
        for (feature, &value) in w.iter().enumerate() {
            let table = if value > T::zero() { &self.log_prob_present } else { &self.log_prob_absent };
            posteriors[0] = posteriors[0] + table[0][feature];
            posteriors[1] = posteriors[1] + table[1][feature];
        }
        Ok(posteriors)
    }

    /// Argmax decision; exact posterior ties resolve to the negative class.
    pub fn classify(&self, w: &[T]) -> Result<Label, BaselineError> {
        let [negative, positive] = self.log_posteriors(w)?;
        Ok(if positive > negative { 1 } else { 0 })
    }

    /// Serializes with the experiment context (category, feature mask) that
    /// produced the model.
    pub fn save(
        &self,
        path: impl AsRef<Path>,
        category: Label,
        feature_mask: &[usize],
    ) -> Result<(), BaselineError> {
        let path = path.as_ref();
        let to_f64 = |values: &[T]| -> Vec<f64> {
            values.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
        };
        let wire = NbFile {
            category,
            log_prior: [
                self.log_prior[0].to_f64().unwrap_or(f64::NAN),
                self.log_prior[1].to_f64().unwrap_or(f64::NAN),
            ],
            log_prob_present: [to_f64(&self.log_prob_present[0]), to_f64(&self.log_prob_present[1])],
            log_prob_absent: [to_f64(&self.log_prob_absent[0]), to_f64(&self.log_prob_absent[1])],
            feature_mask: feature_mask.to_vec(),
        };
        jsonfmt::write_json_file(path, &wire)
            .map_err(|source| BaselineError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Label, Vec<usize>), BaselineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BaselineError::Io { path: path.display().to_string(), source })?;
        let wire: NbFile = serde_json::from_str(&text)?;
        let from_f64 =
            |values: Vec<f64>| -> Vec<T> { values.into_iter().map(T::from_f64_lossy).collect() };
        let model = Self {
            log_prior: [
                T::from_f64_lossy(wire.log_prior[0]),
                T::from_f64_lossy(wire.log_prior[1]),
            ],
            log_prob_present: wire.log_prob_present.map(from_f64),
            log_prob_absent: wire.log_prob_absent.map(from_f64),
        };
        Ok((model, wire.category, wire.feature_mask))
    }
}

#[derive(Serialize, Deserialize)]
struct NbFile {
    category: Label,
    log_prior: [f64; 2],
    log_prob_present: [Vec<f64>; 2],
    log_prob_absent: [Vec<f64>; 2],
    feature_mask: Vec<usize>,
}

fn presence_counts<T, I, S>(samples: I) -> Result<(Vec<u64>, usize), BaselineError>
where
    T: Real,
    I: IntoIterator<Item = S>,
    S: AsRef<[T]>,
{
    let mut counts: Vec<u64> = Vec::new();
    let mut n = 0usize;
    for sample in samples {
        let features = sample.as_ref();
        if n == 0 {
            counts = vec![0; features.len()];
        } else if features.len() != counts.len() {
            return Err(BaselineError::DimensionMismatch {
                expected: counts.len(),
                found: features.len(),
            });
        }
        n += 1;
        for (count, &value) in counts.iter_mut().zip(features) {
            if value > T::zero() {
                *count += 1;
            }
        }
    }
    Ok((counts, n))
}

/// Bit-packed presence vectors supporting exact nearest-neighbor queries.
///
/// On presence vectors the squared Euclidean distance equals the Hamming
/// distance, so neighbors are found by XOR + popcount over packed words. The
/// index is label-free: every one-vs-all problem over the same training set
/// shares it.
#[derive(Debug)]
pub struct KnnIndex {
    bits: Vec<u64>,
    words_per_row: usize,
    rows: usize,
    dimension: usize,
}

impl KnnIndex {
    pub fn build<T, I, S>(vectors: I) -> Result<Self, BaselineError>
    where
        T: Real,
        I: IntoIterator<Item = S>,
        S: AsRef<[T]>,
    {
        let mut index = Self { bits: Vec::new(), words_per_row: 0, rows: 0, dimension: 0 };
        for vector in vectors {
            let features = vector.as_ref();
            if index.rows == 0 {
                index.dimension = features.len();
                index.words_per_row = words_for(features.len());
            } else if features.len() != index.dimension {
                return Err(BaselineError::DimensionMismatch {
                    expected: index.dimension,
                    found: features.len(),
                });
            }
            index.bits.extend(pack_presence(features, index.words_per_row));
            index.rows += 1;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Packs a query vector, checking its dimension.
    pub fn pack_query<T: Real>(&self, w: &[T]) -> Result<Vec<u64>, BaselineError> {
        if w.len() != self.dimension {
            return Err(BaselineError::DimensionMismatch {
                expected: self.dimension,
                found: w.len(),
            });
        }
        Ok(pack_presence(w, self.words_per_row))
    }

    /// Indices of the `count` nearest rows, nearest first; ties resolve to
    /// the lower row index. Returns all rows when `count` exceeds them.
    pub fn nearest(&self, query: &[u64], count: usize) -> Vec<usize> {
        assert_eq!(query.len(), self.words_per_row, "query packed with a different width");
        let mut best: Vec<(u32, usize)> = Vec::with_capacity(count + 1);
        for row in 0..self.rows {
            let offset = row * self.words_per_row;
            let distance: u32 = self.bits[offset..offset + self.words_per_row]
                .iter()
                .zip(query)
                .map(|(&word, &q)| (word ^ q).count_ones())
                .sum();
            let candidate = (distance, row);
            if best.len() == count && candidate >= *best.last().expect("non-empty") {
                continue;
            }
            let position = best.partition_point(|&entry| entry < candidate);
            best.insert(position, candidate);
            best.truncate(count);
        }
        best.into_iter().map(|(_, row)| row).collect()
    }
}

fn words_for(dimension: usize) -> usize {
    (dimension + 63) / 64
}

fn pack_presence<T: Real>(features: &[T], words_per_row: usize) -> Vec<u64> {
    let mut words = vec![0u64; words_per_row];
    for (bit, &value) in features.iter().enumerate() {
        if value > T::zero() {
            words[bit / 64] |= 1 << (bit % 64);
        }
    }
    words
}

/// Majority-vote classifier over the `k` nearest training rows.
#[derive(Debug, Clone)]
pub struct KnnModel {
    index: Arc<KnnIndex>,
    is_positive: Vec<bool>,
    k: usize,
}

impl KnnModel {
    /// Builds a dedicated index; training rows are numbered positives first,
    /// then negatives, which fixes the distance tie-breaking order.
    pub fn train<T, P, N, S, R>(positives: P, negatives: N, k: usize) -> Result<Self, BaselineError>
    where
        T: Real,
        P: IntoIterator<Item = S>,
        S: AsRef<[T]>,
        N: IntoIterator<Item = R>,
        R: AsRef<[T]>,
    {
        let positives: Vec<S> = positives.into_iter().collect();
        let positive_n = positives.len();
        let mut is_positive = vec![true; positive_n];
        let mut index = KnnIndex::build(positives)?;
        for vector in negatives {
            let features = vector.as_ref();
            if index.rows == 0 {
                index.dimension = features.len();
                index.words_per_row = words_for(features.len());
            } else if features.len() != index.dimension {
                return Err(BaselineError::DimensionMismatch {
                    expected: index.dimension,
                    found: features.len(),
                });
            }
            index.bits.extend(pack_presence(features, index.words_per_row));
            index.rows += 1;
            is_positive.push(false);
        }
        Self::from_index(Arc::new(index), is_positive, k)
    }

    /// Wraps a shared index with per-problem labels, so several one-vs-all
    /// models can reuse one set of packed vectors.
    pub fn from_index(
        index: Arc<KnnIndex>,
        is_positive: Vec<bool>,
        k: usize,
    ) -> Result<Self, BaselineError> {
        if is_positive.len() != index.len() {
            return Err(BaselineError::DimensionMismatch {
                expected: index.len(),
                found: is_positive.len(),
            });
        }
        if k == 0 || k % 2 == 0 || k > index.len() {
            return Err(BaselineError::InvalidNeighborCount { k, n: index.len() });
        }
        Ok(Self { index, is_positive, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &Arc<KnnIndex> {
        &self.index
    }

    pub fn classify<T: Real>(&self, w: &[T]) -> Result<Label, BaselineError> {
        let query = self.index.pack_query(w)?;
        Ok(self.classify_from_neighbors(&self.index.nearest(&query, self.k)))
    }

    /// Votes using an externally computed neighbor list (nearest first, from
    /// this model's index); only the first `k` entries are consulted.
    pub fn classify_from_neighbors(&self, nearest: &[usize]) -> Label {
        debug_assert!(nearest.len() >= self.k);
        let votes = nearest[..self.k].iter().filter(|&&row| self.is_positive[row]).count();
        u32::from(2 * votes > self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(values: &[&[f64]]) -> Vec<Vec<f64>> {
        values.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn nb_laplace_smoothing_matches_hand_count() {
        let model = BernoulliNbModel::<f64>::train(
            &rows(&[&[1.0, 0.0]]),
            &rows(&[&[0.0, 1.0]]),
        )
        .unwrap();
        let p_present_positive = model.log_prob_present()[1][0].exp();
        assert!((p_present_positive - 2.0 / 3.0).abs() < 1e-15);
        let p_absent_positive = model.log_prob_absent()[1][0].exp();
        assert!((p_absent_positive - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(model.log_prior()[0], model.log_prior()[1]);
    }

    #[test]
    fn nb_present_and_absent_probabilities_sum_to_one() {
        let model = BernoulliNbModel::<f64>::train(
            &rows(&[&[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]),
            &rows(&[&[0.0, 1.0, 1.0]]),
        )
        .unwrap();
        for class in 0..2 {
            for feature in 0..3 {
                let total = model.log_prob_present()[class][feature].exp()
                    + model.log_prob_absent()[class][feature].exp();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        let prior_total = model.log_prior()[0].exp() + model.log_prior()[1].exp();
        assert!((prior_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nb_prefers_the_evidence_heavy_class() {
        let positives = vec![vec![1.0, 0.0]; 20];
        let negatives = vec![vec![0.0, 1.0]; 20];
        let model = BernoulliNbModel::<f64>::train(&positives, &negatives).unwrap();
        assert_eq!(model.classify(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(model.classify(&[0.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn nb_exact_tie_goes_negative() {
        let model = BernoulliNbModel::<f64>::train(
            &rows(&[&[1.0, 0.0]]),
            &rows(&[&[0.0, 1.0]]),
        )
        .unwrap();
        // both posteriors sum the same two log terms, in swapped order
        assert_eq!(model.classify(&[1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn nb_rejects_empty_class_and_bad_width() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            BernoulliNbModel::<f64>::train(&empty, &rows(&[&[1.0]])),
            Err(BaselineError::EmptyClass("positive"))
        ));
        assert!(matches!(
            BernoulliNbModel::<f64>::train(&rows(&[&[1.0]]), &empty),
            Err(BaselineError::EmptyClass("negative"))
        ));
        let model =
            BernoulliNbModel::<f64>::train(&rows(&[&[1.0, 0.0]]), &rows(&[&[0.0, 1.0]])).unwrap();
        assert!(matches!(
            model.classify(&[1.0]),
            Err(BaselineError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn nb_round_trips_through_json() {
        let model = BernoulliNbModel::<f64>::train(
            &rows(&[&[1.0, 0.0], &[1.0, 1.0]]),
            &rows(&[&[0.0, 1.0]]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nb.json");
        model.save(&path, 4, &[7, 2]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"category\":4,\"log_prior\":["));
        let (loaded, category, mask) = BernoulliNbModel::<f64>::load(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(category, 4);
        assert_eq!(mask, vec![7, 2]);
    }

    #[test]
    fn knn_recovers_training_labels_with_k1() {
        let positives = rows(&[&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]]);
        let negatives = rows(&[&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let model = KnnModel::train(&positives, &negatives, 1).unwrap();
        for positive in &positives {
            assert_eq!(model.classify(positive.as_slice()).unwrap(), 1);
        }
        for negative in &negatives {
            assert_eq!(model.classify(negative.as_slice()).unwrap(), 0);
        }
    }

    #[test]
    fn knn_majority_vote() {
        // two positives at distance 1, one negative at distance 1, k = 3
        let positives = rows(&[&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 0.0]]);
        let negatives = rows(&[&[1.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 1.0, 1.0]]);
        let model = KnnModel::train(&positives, &negatives, 3).unwrap();
        assert_eq!(model.classify(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn knn_distance_ties_prefer_lower_training_index() {
        // rows 0 and 1 are equidistant from the query; with k = 1 the lower
        // training index wins, so whichever class was packed first prevails
        let a = rows(&[&[1.0, 0.0]]);
        let b = rows(&[&[0.0, 1.0]]);
        let a_first = KnnModel::train(&a, &b, 1).unwrap();
        assert_eq!(a_first.classify(&[1.0, 1.0]).unwrap(), 1);
        let b_first = KnnModel::train(&b, &a, 1).unwrap();
        assert_eq!(b_first.classify(&[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn knn_binarizes_queries_internally() {
        let model = KnnModel::train(
            &rows(&[&[1.0, 0.0]]),
            &rows(&[&[0.0, 1.0]]),
            1,
        )
        .unwrap();
        assert_eq!(model.classify(&[255.0, 0.0]).unwrap(), 1);
        assert_eq!(model.classify(&[0.0, 17.5]).unwrap(), 0);
    }

    #[test]
    fn knn_validates_k() {
        let positives = rows(&[&[1.0], &[1.0]]);
        let negatives = rows(&[&[0.0]]);
        for bad in [0, 2, 4, 5] {
            assert!(matches!(
                KnnModel::train(&positives, &negatives, bad),
                Err(BaselineError::InvalidNeighborCount { .. })
            ));
        }
        assert!(KnnModel::train(&positives, &negatives, 3).is_ok());
    }

    #[test]
    fn knn_checks_query_dimension() {
        let model =
            KnnModel::train(&rows(&[&[1.0, 0.0]]), &rows(&[&[0.0, 1.0]]), 1).unwrap();
        assert!(matches!(
            model.classify(&[1.0]),
            Err(BaselineError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn shared_index_votes_with_per_problem_labels() {
        let vectors = rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let index = Arc::new(KnnIndex::build(&vectors).unwrap());
        let query = index.pack_query(&[1.0, 0.0]).unwrap();
        let nearest = index.nearest(&query, 3);
        assert_eq!(nearest, vec![0, 2, 1]);

        let as_first = KnnModel::from_index(Arc::clone(&index), vec![true, false, false], 1)
            .unwrap();
        let as_last = KnnModel::from_index(index, vec![false, true, true], 1).unwrap();
        assert_eq!(as_first.classify_from_neighbors(&nearest), 1);
        assert_eq!(as_last.classify_from_neighbors(&nearest), 0);
    }

    #[test]
    fn packed_index_handles_wide_vectors() {
        // 130 features spans three 64-bit words
        let mut a = vec![0.0; 130];
        a[0] = 1.0;
        a[129] = 1.0;
        let mut b = vec![0.0; 130];
        b[64] = 1.0;
        let index = KnnIndex::build(&[a.clone(), b]).unwrap();
        let query = index.pack_query(&a).unwrap();
        assert_eq!(index.nearest(&query, 2), vec![0, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nb_posteriors_stay_finite(
                positives in proptest::collection::vec(
                    proptest::collection::vec(0.0_f64..2.0, 4), 1..6),
                negatives in proptest::collection::vec(
                    proptest::collection::vec(0.0_f64..2.0, 4), 1..6),
                query in proptest::collection::vec(0.0_f64..2.0, 4),
            ) {
                let model = BernoulliNbModel::<f64>::train(&positives, &negatives).unwrap();
                let posteriors = model.log_posteriors(&query).unwrap();
                prop_assert!(posteriors[0].is_finite());
                prop_assert!(posteriors[1].is_finite());
            }

            #[test]
            fn nb_decision_ignores_shared_offsets(
                positives in proptest::collection::vec(
                    proptest::collection::vec(0.0_f64..2.0, 3), 1..5),
                negatives in proptest::collection::vec(
                    proptest::collection::vec(0.0_f64..2.0, 3), 1..5),
                query in proptest::collection::vec(0.0_f64..2.0, 3),
                offset in -100.0_f64..100.0,
            ) {
                let model = BernoulliNbModel::<f64>::train(&positives, &negatives).unwrap();
                let [negative, positive] = model.log_posteriors(&query).unwrap();
                let decision = model.classify(&query).unwrap();
                let shifted = u32::from(positive + offset > negative + offset);
                // shared offsets cancel except for rounding at exact ties,
                // where both sides agree on equality
                if positive != negative {
                    prop_assert_eq!(decision, shifted);
                }
            }

            #[test]
            fn knn_k1_is_self_consistent(
                bits in proptest::collection::btree_set(
                    proptest::collection::vec(proptest::bool::ANY, 6), 2..10),
                labels_seed in proptest::num::u64::ANY,
            ) {
                // distinct presence vectors, arbitrary labels
                let vectors: Vec<Vec<f64>> = bits
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                    .collect();
                let is_positive: Vec<bool> =
                    (0..vectors.len()).map(|i| (labels_seed >> (i % 64)) & 1 == 1).collect();
                let index = Arc::new(KnnIndex::build(&vectors).unwrap());
                let model =
                    KnnModel::from_index(index, is_positive.clone(), 1).unwrap();
                for (vector, &positive) in vectors.iter().zip(&is_positive) {
                    let expected = u32::from(positive);
                    prop_assert_eq!(model.classify(vector.as_slice()).unwrap(), expected);
                }
            }
        }
    }
}
