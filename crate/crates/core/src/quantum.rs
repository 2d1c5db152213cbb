//! Detection-projector classification: class-statistic vectors, rank-1
//! density operators, the spectral decomposition of ρ₁ − λρ₀, and the
//! projector-overlap decision rule.
//!
//! The difference operator D = ρ₁ − λρ₀ of two rank-1 densities acts only on
//! the two-dimensional span of their factors, so its nonzero spectrum is
//! computed analytically in that span rather than by a dense K×K solve. The
//! dense Jacobi solver in [`crate::linalg`] exists solely to cross-check this
//! path in tests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::jsonfmt;
use crate::linalg::{dot, norm, scaled_outer};
use crate::scalar::Real;

/// Unit factors whose dot product is within this of ±1 are treated as
/// collinear; the difference operator then collapses to a multiple of ρ₁.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("cannot estimate a statistic vector from zero samples")]
    EmptySampleSet,
    #[error("no sample has a non-zero value in any selected feature")]
    ZeroStatVector,
    #[error("cannot normalize a zero factor into a density operator")]
    ZeroFactor,
    #[error("prior must lie in [0, 1), got {0}")]
    PriorOutOfRange(f64),
    #[error("lambda must be a positive finite real, got {0}")]
    InvalidLambda(f64),
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("expected vectors of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("test vector is zero after masking")]
    ZeroTestVector,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-feature presence counts of one class, L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStatVector<T> {
    v: Vec<T>,
    support_count: usize,
}

impl<T: Real> ClassStatVector<T> {
    /// Normalizes raw presence counts; `support_count` is the number of
    /// samples the counts summarize.
    pub fn from_counts(counts: &[u64], support_count: usize) -> Result<Self, QuantumError> {
        if support_count == 0 {
            return Err(QuantumError::EmptySampleSet);
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(QuantumError::ZeroStatVector);
        }
        let raw: Vec<T> = counts
            .iter()
            .map(|&c| T::from_u64(c).expect("count fits Real"))
            .collect();
        let scale = T::one() / norm(&raw);
        Ok(Self { v: raw.iter().map(|&c| c * scale).collect(), support_count })
    }

    /// The unit-norm statistic vector (all components non-negative).
    pub fn vector(&self) -> &[T] {
        &self.v
    }

    pub fn support_count(&self) -> usize {
        self.support_count
    }

    pub fn dimension(&self) -> usize {
        self.v.len()
    }
}

/// Counts, per feature, how many sample vectors have a value > 0 there, then
/// L2-normalizes the count vector.
pub fn estimate_stat_vector<T, I, S>(samples: I) -> Result<ClassStatVector<T>, QuantumError>
where
    T: Real,
    I: IntoIterator<Item = S>,
    S: AsRef<[T]>,
{
    let mut counts: Vec<u64> = Vec::new();
    let mut support = 0usize;
    for sample in samples {
        let features = sample.as_ref();
        if support == 0 {
            counts = vec![0; features.len()];
        } else if features.len() != counts.len() {
            return Err(QuantumError::DimensionMismatch {
                expected: counts.len(),
                found: features.len(),
            });
        }
        support += 1;
        for (count, &value) in counts.iter_mut().zip(features) {
            if value > T::zero() {
                *count += 1;
            }
        }
    }
    ClassStatVector::from_counts(&counts, support)
}

/// Rank-1 symmetric positive-semidefinite trace-1 operator, stored as the
/// unit factor of its outer-product form.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T> {
    factor: Vec<T>,
}

impl<T: Real> DensityOperator<T> {
    /// Normalizes the factor, which divides the implied outer product by its
    /// trace.
    pub fn from_factor(factor: &[T]) -> Result<Self, QuantumError> {
        let scale = norm(factor);
        if !(scale > T::zero()) {
            return Err(QuantumError::ZeroFactor);
        }
        Ok(Self { factor: factor.iter().map(|&x| x / scale).collect() })
    }

    pub fn factor(&self) -> &[T] {
        &self.factor
    }

    pub fn dimension(&self) -> usize {
        self.factor.len()
    }

    /// Materializes the full matrix; used by tests and diagnostics only.
    pub fn matrix(&self) -> Vec<Vec<T>> {
        scaled_outer(&self.factor, &self.factor, T::one())
    }
}

/// Builds |v⟩⟨v| / tr(|v⟩⟨v|). The trace division re-normalizes the factor,
/// a no-op up to rounding since statistic vectors are already unit norm.
pub fn density_from_stat<T: Real>(stats: &ClassStatVector<T>) -> DensityOperator<T> {
    DensityOperator::from_factor(stats.vector()).expect("statistic vectors are non-zero")
}

/// Prior odds of the negative class: ξ / (1 − ξ).
pub fn lambda_from_prior<T: Real>(xi: T) -> Result<T, QuantumError> {
    if !(xi >= T::zero()) || xi >= T::one() {
        return Err(QuantumError::PriorOutOfRange(xi.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(xi / (T::one() - xi))
}

/// Projector onto the positive eigenspace of D = ρ₁ − λρ₀, with the full
/// nonzero spectrum kept as diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionProjector<T> {
    u: Vec<T>,
    eta: T,
    beta: T,
    u_perp: Option<Vec<T>>,
    degenerate: bool,
}

impl<T: Real> DetectionProjector<T> {
    /// Unit eigenvector spanning the acceptance subspace; all zeros when
    /// degenerate.
    pub fn u(&self) -> &[T] {
        &self.u
    }

    /// The positive eigenvalue; 0 when degenerate.
    pub fn eta(&self) -> T {
        self.eta
    }

    /// The negative eigenvalue; 0 when D has no negative part.
    pub fn beta(&self) -> T {
        self.beta
    }

    /// Unit eigenvector for `beta`, when a negative part exists and the
    /// projector was computed (rather than deserialized).
    pub fn u_perp(&self) -> Option<&[T]> {
        self.u_perp.as_deref()
    }

    /// True when D has no positive eigenvalue, so the acceptance subspace is
    /// empty and every score is 0.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dimension(&self) -> usize {
        self.u.len()
    }
}

/// Spectral decomposition of D = ρ₁ − λρ₀, solved in the 2-dimensional span
/// of the two factors.
///
/// With a = ⟨v₀, v₁⟩ (clamped to [−1, 1]) and s = √(1 − a²), the orthonormal
/// basis e₁ = v₁, e₂ = (v₀ − a·v₁)/s restricts D to the 2×2 matrix
/// [[1 − λa², −λas], [−λas, −λs²]], whose eigenvalues are
/// μ± = ((1 − λ) ± √((1 − λ)² + 4λs²)) / 2. The eigenvalue pair is computed
/// cancellation-free via the product identity η·β = −λs². The returned u has
/// a non-negative component along v₁ so serialization is deterministic.
///
/// Collinear factors (s below 1e-12) collapse D to (1 − λ)·ρ₁: for λ < 1 the
/// projector is ρ₁ itself with η = 1 − λ; for λ ≥ 1 there is no positive
/// eigenvalue and the projector is degenerate (logged as a warning since
/// every sample will be rejected).
pub fn compute_projector<T: Real>(
    rho1: &DensityOperator<T>,
    rho0: &DensityOperator<T>,
    lambda: T,
) -> Result<DetectionProjector<T>, QuantumError> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(QuantumError::InvalidLambda(lambda.to_f64().unwrap_or(f64::NAN)));
    }
    if rho0.dimension() != rho1.dimension() {
        return Err(QuantumError::DimensionMismatch {
            expected: rho1.dimension(),
            found: rho0.dimension(),
        });
    }
    let v1 = rho1.factor();
    let v0 = rho0.factor();
    let dimension = v1.len();

    let a = dot(v0, v1).min(T::one()).max(-T::one());
    let s_squared = (T::one() - a * a).max(T::zero());
    let s = s_squared.sqrt();

    if s < T::from_f64_lossy(COLLINEAR_TOL) {
        let remaining = T::one() - lambda;
        if remaining > T::zero() {
            return Ok(DetectionProjector {
                u: v1.to_vec(),
                eta: remaining,
                beta: T::zero(),
                u_perp: None,
                degenerate: false,
            });
        }
        log::warn!(
            "collinear class statistics with lambda >= 1: projector is degenerate, \
             every sample will be classified 0"
        );
        let negative_part = remaining < T::zero();
        return Ok(DetectionProjector {
            u: vec![T::zero(); dimension],
            eta: T::zero(),
            beta: remaining,
            u_perp: negative_part.then(|| v1.to_vec()),
            degenerate: true,
        });
    }

    let trace = T::one() - lambda;
    let discriminant = (trace * trace + T::from_f64_lossy(4.0) * lambda * s_squared).sqrt();
    let two = T::from_f64_lossy(2.0);
    // One eigenvalue comes from the branch that adds magnitudes; the other
    // from the determinant identity η·β = det = −λs², avoiding cancellation.
    let (eta, beta) = if trace >= T::zero() {
        let eta = (trace + discriminant) / two;
        (eta, -lambda * s_squared / eta)
    } else {
        let beta = (trace - discriminant) / two;
        (-lambda * s_squared / beta, beta)
    };

    // Eigenvector of the 2×2 restriction for η, expressed in (e₁, e₂). The
    // first coordinate η + λs² is strictly positive, which fixes the sign
    // convention along v₁.
    let x = eta + lambda * s_squared;
    let y = -lambda * a * s;
    let scale = T::one() / (x * x + y * y).sqrt();
    let (x, y) = (x * scale, y * scale);

    // e₂ = (v₀ − a·v₁)/s, lifted on the fly.
    let lift = |c1: T, c2: T| -> Vec<T> {
        v1.iter()
            .zip(v0)
            .map(|(&b1, &b0)| c1 * b1 + c2 * (b0 - a * b1) / s)
            .collect()
    };
    let u = unit(lift(x, y));
    let u_perp = unit(lift(-y, x));

    Ok(DetectionProjector { u, eta, beta, u_perp: Some(u_perp), degenerate: false })
}

fn unit<T: Real>(mut v: Vec<T>) -> Vec<T> {
    let scale = T::one() / norm(&v);
    for x in &mut v {
        *x = *x * scale;
    }
    v
}

/// Projector overlap ⟨ŵ, u⟩² of the L2-normalized test vector, in [0, 1].
/// Degenerate projectors score 0 for every input.
pub fn score<T: Real>(projector: &DetectionProjector<T>, w: &[T]) -> Result<T, QuantumError> {
    if w.len() != projector.dimension() {
        return Err(QuantumError::DimensionMismatch {
            expected: projector.dimension(),
            found: w.len(),
        });
    }
    let scale = norm(w);
    if !(scale > T::zero()) {
        return Err(QuantumError::ZeroTestVector);
    }
    if projector.degenerate {
        return Ok(T::zero());
    }
    let overlap = dot(w, &projector.u) / scale;
    Ok((overlap * overlap).min(T::one()).max(T::zero()))
}

/// Decision rule: 1 when the score reaches the threshold. Zero test vectors
/// carry no evidence of membership and are assigned 0.
pub fn classify<T: Real>(
    projector: &DetectionProjector<T>,
    w: &[T],
    threshold: T,
) -> Result<Label, QuantumError> {
    match score(projector, w) {
        Ok(value) => Ok(if value >= threshold { 1 } else { 0 }),
        Err(QuantumError::ZeroTestVector) => Ok(0),
        Err(other) => Err(other),
    }
}

/// Decision-rule parameters. The error costs are recorded for completeness
/// but do not enter the computation: the rule assumes symmetric error costs
/// and zero cost for correct decisions, under which λ reduces to the prior
/// odds ξ/(1 − ξ).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionConfig<T> {
    pub xi: T,
    pub lambda: T,
    pub threshold: T,
    /// (correct-reject, false-alarm, miss, correct-accept) costs.
    pub costs: [T; 4],
}

impl<T: Real> Default for DecisionConfig<T> {
    /// Balanced priors: ξ = 0.5, λ = 1, threshold 0.5, unit error costs.
    fn default() -> Self {
        let half = T::from_f64_lossy(0.5);
        Self {
            xi: half,
            lambda: T::one(),
            threshold: half,
            costs: [T::zero(), T::one(), T::one(), T::zero()],
        }
    }
}

impl<T: Real> DecisionConfig<T> {
    /// Derives λ from the negative-class prior.
    pub fn from_prior(xi: T, threshold: T) -> Result<Self, QuantumError> {
        let lambda = lambda_from_prior(xi)?;
        Self { xi, lambda, threshold, ..Self::default() }.validated()
    }

    /// Overrides λ directly, leaving the recorded prior untouched.
    pub fn with_lambda(self, lambda: T) -> Result<Self, QuantumError> {
        Self { lambda, ..self }.validated()
    }

    pub fn with_threshold(self, threshold: T) -> Result<Self, QuantumError> {
        Self { threshold, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self, QuantumError> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(QuantumError::InvalidLambda(self.lambda.to_f64().unwrap_or(f64::NAN)));
        }
        if !(self.threshold >= T::zero() && self.threshold <= T::one()) {
            return Err(QuantumError::InvalidThreshold(
                self.threshold.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(self)
    }
}

/// A fitted one-vs-all detector for a single category: the projector plus
/// everything needed to apply it to full-dimension samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDetector<T> {
    category: Label,
    lambda: T,
    threshold: T,
    feature_mask: Vec<usize>,
    projector: DetectionProjector<T>,
}

impl<T: Real> TrainedDetector<T> {
    /// Fits from already-aggregated presence statistics. `feature_mask` holds
    /// the original indices of the masked feature space, in mask order.
    pub fn from_stats(
        category: Label,
        positive_stats: &ClassStatVector<T>,
        negative_stats: &ClassStatVector<T>,
        feature_mask: Vec<usize>,
        config: &DecisionConfig<T>,
    ) -> Result<Self, QuantumError> {
        if feature_mask.len() != positive_stats.dimension() {
            return Err(QuantumError::DimensionMismatch {
                expected: positive_stats.dimension(),
                found: feature_mask.len(),
            });
        }
        let rho1 = density_from_stat(positive_stats);
        let rho0 = density_from_stat(negative_stats);
        let projector = compute_projector(&rho1, &rho0, config.lambda)?;
        Ok(Self {
            category,
            lambda: config.lambda,
            threshold: config.threshold,
            feature_mask,
            projector,
        })
    }

    /// Fits from masked training vectors of the category (positives) and of
    /// everything else (negatives).
    pub fn fit<P, N, S, R>(
        category: Label,
        positives: P,
        negatives: N,
        feature_mask: Vec<usize>,
        config: &DecisionConfig<T>,
    ) -> Result<Self, QuantumError>
    where
        P: IntoIterator<Item = S>,
        S: AsRef<[T]>,
        N: IntoIterator<Item = R>,
        R: AsRef<[T]>,
    {
        let positive_stats = estimate_stat_vector(positives)?;
        let negative_stats = estimate_stat_vector(negatives)?;
        Self::from_stats(category, &positive_stats, &negative_stats, feature_mask, config)
    }

    pub fn category(&self) -> Label {
        self.category
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn feature_mask(&self) -> &[usize] {
        &self.feature_mask
    }

    pub fn projector(&self) -> &DetectionProjector<T> {
        &self.projector
    }

    /// Restricts a full-dimension feature vector to the mask, in mask order.
    pub fn restrict(&self, features: &[T]) -> Result<Vec<T>, QuantumError> {
        let needed = self.feature_mask.iter().max().map_or(0, |&i| i + 1);
        if features.len() < needed {
            return Err(QuantumError::DimensionMismatch {
                expected: needed,
                found: features.len(),
            });
        }
        Ok(self.feature_mask.iter().map(|&i| features[i]).collect())
    }

    /// Scores a masked feature vector.
    pub fn score(&self, masked: &[T]) -> Result<T, QuantumError> {
        score(&self.projector, masked)
    }

    /// Classifies a masked feature vector with the stored threshold.
    pub fn classify(&self, masked: &[T]) -> Result<Label, QuantumError> {
        classify(&self.projector, masked, self.threshold)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QuantumError> {
        let path = path.as_ref();
        let to_f64 = |x: &T| x.to_f64().unwrap_or(f64::NAN);
        let wire = DetectorFile {
            category: self.category,
            lambda: to_f64(&self.lambda),
            threshold: to_f64(&self.threshold),
            eta: to_f64(&self.projector.eta),
            beta: to_f64(&self.projector.beta),
            u: self.projector.u.iter().map(|x| to_f64(x)).collect(),
            degenerate: self.projector.degenerate,
            feature_mask: self.feature_mask.clone(),
        };
        jsonfmt::write_json_file(path, &wire)
            .map_err(|source| QuantumError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuantumError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| QuantumError::Io { path: path.display().to_string(), source })?;
        let wire: DetectorFile = serde_json::from_str(&text)?;
        if wire.u.len() != wire.feature_mask.len() {
            return Err(QuantumError::InvalidModel(format!(
                "u has {} components but the mask selects {} features",
                wire.u.len(),
                wire.feature_mask.len()
            )));
        }
        if !(wire.lambda > 0.0 && wire.lambda.is_finite()) {
            return Err(QuantumError::InvalidModel(format!("lambda = {}", wire.lambda)));
        }
        if !(0.0..=1.0).contains(&wire.threshold) {
            return Err(QuantumError::InvalidModel(format!("threshold = {}", wire.threshold)));
        }
        let u: Vec<T> = wire.u.iter().copied().map(T::from_f64_lossy).collect();
        if !wire.degenerate {
            let deviation = (norm(&u) - T::one()).abs();
            if deviation > T::from_f64_lossy(1e-6) {
                return Err(QuantumError::InvalidModel("u is not unit norm".into()));
            }
            if wire.eta <= 0.0 {
                return Err(QuantumError::InvalidModel(format!(
                    "non-degenerate model with eta = {}",
                    wire.eta
                )));
            }
        }
        Ok(Self {
            category: wire.category,
            lambda: T::from_f64_lossy(wire.lambda),
            threshold: T::from_f64_lossy(wire.threshold),
            feature_mask: wire.feature_mask,
            projector: DetectionProjector {
                u,
                eta: T::from_f64_lossy(wire.eta),
                beta: T::from_f64_lossy(wire.beta),
                u_perp: None,
                degenerate: wire.degenerate,
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DetectorFile {
    category: Label,
    lambda: f64,
    threshold: f64,
    eta: f64,
    beta: f64,
    u: Vec<f64>,
    degenerate: bool,
    feature_mask: Vec<usize>,
}
