//! Binary classification by quantum-style signal detection: each class is
//! summarized as a rank-1 density operator built from feature presence
//! statistics, and the detector is the positive eigenspace of the operator
//! difference ρ₁ − λρ₀. The crate bundles the classifier with chi-square
//! feature selection, from-scratch Naive Bayes and KNN baselines, MNIST IDX
//! and CSV ingestion, and a one-vs-all evaluation harness that renders a
//! recall comparison report.
//!
//! Everything numeric is generic over [`scalar::Real`] (implemented by `f32`
//! and `f64`); the `*64`/`*32` aliases at the crate root pin the common
//! instantiations.

pub mod baselines;
pub mod dataset;
pub mod evaluation;
pub mod feature_selection;
pub mod jsonfmt;
pub mod linalg;
pub mod quantum;
pub mod report;
pub mod scalar;

pub use baselines::{BernoulliNbModel, KnnIndex, KnnModel};
pub use dataset::{Dataset, Label, RawSample};
pub use evaluation::{
    run_experiment, ExperimentConfig, MaskMode, ModelKind, SelectionScope,
};
pub use feature_selection::FeatureMask;
pub use quantum::{DecisionConfig, DetectionProjector, TrainedDetector};
pub use report::EvaluationReport;
pub use scalar::Real;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type RawSample64 = dataset::RawSample<f64>;
pub type RawSample32 = dataset::RawSample<f32>;
pub type FeatureMask64 = feature_selection::FeatureMask<f64>;
pub type FeatureMask32 = feature_selection::FeatureMask<f32>;
pub type DecisionConfig64 = quantum::DecisionConfig<f64>;
pub type DecisionConfig32 = quantum::DecisionConfig<f32>;
pub type DetectionProjector64 = quantum::DetectionProjector<f64>;
pub type DetectionProjector32 = quantum::DetectionProjector<f32>;
pub type TrainedDetector64 = quantum::TrainedDetector<f64>;
pub type TrainedDetector32 = quantum::TrainedDetector<f32>;
pub type BernoulliNb64 = baselines::BernoulliNbModel<f64>;
pub type BernoulliNb32 = baselines::BernoulliNbModel<f32>;
pub type ExperimentConfig64 = evaluation::ExperimentConfig<f64>;
pub type ExperimentConfig32 = evaluation::ExperimentConfig<f32>;
