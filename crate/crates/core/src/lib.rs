//! Open-set classifier head over precomputed feature vectors.
//!
//! Labeled images train one-hot targets and unlabeled images train a constant
//! negative target under a squared-exponential loss; per-class rejection
//! thresholds are then calibrated on training scores with ROC analysis. An
//! image whose best score misses its class threshold is reported as irrelevant.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod rng;
pub mod roc;
pub mod scalar;
pub mod targets;
pub mod trainer;

pub use classifier::{classify_set, decide, score, Decision, ScoreVector, Verdict};
pub use dataset::{
    generate_synthetic, load_feature_set, normalize_features, write_feature_set, FeatureRecord, Label, SynthSpec,
    UNLABELED_MARKER,
};
pub use error::{Error, Result};
pub use harness::{
    evaluate, run_comparison, run_only_labeled, run_plus_one, ComparisonConfig, ComparisonTable, EvalReport,
};
pub use roc::{build_roc, calibrate, collect_pools, normal_threshold, roc_threshold, trr_frr, Strategy};
pub use scalar::Scalar;
pub use targets::{build_plus_one_targets, build_target_matrix, DEFAULT_NEGATIVE_VALUE};
pub use trainer::{loss, loss_gradient, residual, train_class, train_model, TrainConfig};

pub type FeatureSet = dataset::FeatureSet<f64>;
pub type FeatureSet32 = dataset::FeatureSet<f32>;
pub type TargetMatrix = targets::TargetMatrix<f64>;
pub type TargetMatrix32 = targets::TargetMatrix<f32>;
pub type ClassifierModel = trainer::ClassifierModel<f64>;
pub type ClassifierModel32 = trainer::ClassifierModel<f32>;
pub type ThresholdSet = roc::ThresholdSet<f64>;
pub type ThresholdSet32 = roc::ThresholdSet<f32>;
pub type RocCurve = roc::RocCurve<f64>;
pub type RocCurve32 = roc::RocCurve<f32>;
