//! End-to-end evaluation of the open-set head against the "+1 class" and
//! "only labeled" baselines.

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_set, score, Decision, Verdict};
use crate::dataset::{FeatureSet, Label};
use crate::error::{Error, Result};
use crate::roc::{calibrate, Strategy, ThresholdSet};
use crate::scalar::Scalar;
use crate::targets::{build_plus_one_targets, build_target_matrix, CATCH_ALL_CLASS};
use crate::trainer::{train_model, ClassifierModel, TrainConfig};

pub const OUR_METHOD: &str = "our_method";
pub const OUR_METHOD_ROC: &str = "our_method_roc";
pub const PLUS_ONE: &str = "plus_one";
pub const ONLY_LABELED: &str = "only_labeled";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub negative_value: Option<f64>,
    pub strategy: Option<Strategy>,
    pub constraint: Option<f64>,
    pub seed: u64,
}

/// Accuracies over one validation set. An accuracy with an empty denominator
/// is reported as 1.0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub relevant_accuracy: f64,
    pub irrelevant_accuracy: f64,
    pub cumulative_accuracy: f64,
    pub relevant_correct: usize,
    pub relevant_total: usize,
    pub irrelevant_correct: usize,
    pub irrelevant_total: usize,
    pub relevant_denominator_zero: bool,
    pub irrelevant_denominator_zero: bool,
    pub per_class: Vec<ClassAccuracy>,
    pub config: ConfigEcho,
}

fn fraction(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (1.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Tallies decisions against the label column of `val`.
///
/// A labeled record is correct only when it is kept as relevant and assigned
/// its own class; an unlabeled record is correct when it is rejected.
pub fn tally<T: Scalar>(
    method: &str,
    decisions: &[Decision<T>],
    val: &FeatureSet<T>,
    config: ConfigEcho,
) -> Result<EvalReport> {
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut per_class: Vec<ClassAccuracy> = val
        .class_names()
        .iter()
        .map(|c| ClassAccuracy {
            class: c.clone(),
            correct: 0,
            total: 0,
        })
        .collect();
    let (mut rel_ok, mut rel_n, mut irr_ok, mut irr_n) = (0, 0, 0, 0);
    for (rec, d) in val.records().iter().zip(decisions) {
        debug_assert_eq!(rec.id, d.id);
        match &rec.label {
            Label::Class(name) => {
                let ok = matches!(&d.verdict, Verdict::Relevant(c) if c == name);
                rel_n += 1;
                rel_ok += ok as usize;
                let idx = val.class_index(name).expect("label collected into class_names");
                per_class[idx].total += 1;
                per_class[idx].correct += ok as usize;
            }
            Label::Unlabeled => {
                irr_n += 1;
                irr_ok += (d.verdict == Verdict::Irrelevant) as usize;
            }
        }
    }
    let (relevant_accuracy, relevant_denominator_zero) = fraction(rel_ok, rel_n);
    let (irrelevant_accuracy, irrelevant_denominator_zero) = fraction(irr_ok, irr_n);
    Ok(EvalReport {
        method: method.to_string(),
        relevant_accuracy,
        irrelevant_accuracy,
        cumulative_accuracy: (rel_ok + irr_ok) as f64 / val.len() as f64,
        relevant_correct: rel_ok,
        relevant_total: rel_n,
        irrelevant_correct: irr_ok,
        irrelevant_total: irr_n,
        relevant_denominator_zero,
        irrelevant_denominator_zero,
        per_class,
        config,
    })
}

fn echo<T: Scalar>(model: &ClassifierModel<T>, strategy: Option<Strategy>) -> ConfigEcho {
    ConfigEcho {
        negative_value: model.train_meta.negative_value.map(|v| v.as_f64()),
        strategy,
        constraint: strategy.and_then(|s| s.constraint()),
        seed: model.train_meta.config.seed,
    }
}

pub fn evaluate<T: Scalar>(
    model: &ClassifierModel<T>,
    thresholds: &ThresholdSet<T>,
    val: &FeatureSet<T>,
) -> Result<EvalReport> {
    evaluate_as("evaluation", model, thresholds, val)
}

pub fn evaluate_as<T: Scalar>(
    method: &str,
    model: &ClassifierModel<T>,
    thresholds: &ThresholdSet<T>,
    val: &FeatureSet<T>,
) -> Result<EvalReport> {
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let decisions = classify_set(model, val, thresholds)?;
    tally(method, &decisions, val, echo(model, Some(thresholds.strategy)))
}

/// Trains on the labeled records alone and rejects with normal thresholds.
pub fn run_only_labeled<T: Scalar>(
    train: &FeatureSet<T>,
    val: &FeatureSet<T>,
    cfg: &TrainConfig<T>,
) -> Result<EvalReport> {
    let labeled = train.labeled_subset();
    let targets = build_target_matrix(&labeled, T::lit(crate::targets::DEFAULT_NEGATIVE_VALUE))?;
    let model = train_model(&labeled, &targets, cfg)?;
    let thresholds = calibrate(&model, &labeled, Strategy::Normal)?;
    evaluate_as(ONLY_LABELED, &model, &thresholds, val)
}

/// Argmax-only decisions for a model whose last class is the catch-all.
pub fn plus_one_decisions<T: Scalar>(model: &ClassifierModel<T>, val: &FeatureSet<T>) -> Result<Vec<Decision<T>>> {
    let catch_all = model.n_classes() - 1;
    val.records()
        .iter()
        .map(|rec| {
            let sv = score(model, &rec.id, &rec.features).map_err(|e| e.in_record(rec.id.clone()))?;
            let verdict = if sv.top_class == catch_all {
                Verdict::Irrelevant
            } else {
                Verdict::Relevant(model.class_names[sv.top_class].clone())
            };
            Ok(Decision {
                id: sv.id,
                verdict,
                top_class: sv.top_class,
                top_score: sv.top_score,
                threshold: None,
            })
        })
        .collect()
}

/// Unlabeled records become an extra class; rejection is argmax on that class.
pub fn run_plus_one<T: Scalar>(train: &FeatureSet<T>, val: &FeatureSet<T>, cfg: &TrainConfig<T>) -> Result<EvalReport> {
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let targets = build_plus_one_targets(train)?;
    let model = train_model(train, &targets, cfg)?;
    debug_assert_eq!(model.class_names.last().map(String::as_str), Some(CATCH_ALL_CLASS));
    let decisions = plus_one_decisions(&model, val)?;
    tally(PLUS_ONE, &decisions, val, echo(&model, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComparisonConfig<T> {
    pub train: TrainConfig<T>,
    pub negative_value: T,
    /// `None` selects the unconstrained ROC optimum for the ROC row.
    pub constraint: Option<f64>,
}

impl<T: Scalar> Default for ComparisonConfig<T> {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            negative_value: T::lit(crate::targets::DEFAULT_NEGATIVE_VALUE),
            constraint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub dim: usize,
    pub classes: Vec<String>,
    pub train_labeled: usize,
    pub train_unlabeled: usize,
    pub val_labeled: usize,
    pub val_unlabeled: usize,
}

impl DatasetDescriptor {
    pub fn of<T: Scalar>(train: &FeatureSet<T>, val: &FeatureSet<T>) -> Self {
        Self {
            dim: train.dim(),
            classes: train.class_names().to_vec(),
            train_labeled: train.labeled_count(),
            train_unlabeled: train.unlabeled_count(),
            val_labeled: val.labeled_count(),
            val_unlabeled: val.unlabeled_count(),
        }
    }
}

/// One row of the comparison; exactly one of `report` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

impl MethodRow {
    fn from_result(method: &str, result: Result<EvalReport>) -> Self {
        match result {
            Ok(mut report) => {
                report.method = method.to_string();
                Self {
                    method: method.to_string(),
                    report: Some(report),
                    error: None,
                }
            }
            Err(e) => Self {
                method: method.to_string(),
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub dataset: DatasetDescriptor,
    pub rows: Vec<MethodRow>,
}

impl ComparisonTable {
    pub fn report(&self, method: &str) -> Option<&EvalReport> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .and_then(|r| r.report.as_ref())
    }
}

/// Our method with normal and ROC thresholds, then both baselines, all on the
/// same train/validation pair. A failing row is recorded and the rest still run.
pub fn run_comparison<T: Scalar>(
    train: &FeatureSet<T>,
    val: &FeatureSet<T>,
    cfg: &ComparisonConfig<T>,
) -> Result<ComparisonTable> {
    if train.dim() != val.dim() {
        return Err(Error::Dimension {
            expected: train.dim(),
            actual: val.dim(),
        });
    }
    let roc_strategy = match cfg.constraint {
        Some(constraint) => Strategy::RocConstrained { constraint },
        None => Strategy::RocOptimal,
    };

    let ours = build_target_matrix(train, cfg.negative_value).and_then(|t| train_model(train, &t, &cfg.train));
    let (normal_row, roc_row) = match &ours {
        Ok(model) => {
            let eval =
                |strategy| calibrate(model, train, strategy).and_then(|th| evaluate_as(OUR_METHOD, model, &th, val));
            (eval(Strategy::Normal), eval(roc_strategy))
        }
        Err(e) => {
            let msg = e.to_string();
            (Err(Error::InvalidConfig(msg.clone())), Err(Error::InvalidConfig(msg)))
        }
    };

    let (plus_one, only_labeled) = rayon::join(
        || run_plus_one(train, val, &cfg.train),
        || run_only_labeled(train, val, &cfg.train),
    );

    Ok(ComparisonTable {
        dataset: DatasetDescriptor::of(train, val),
        rows: vec![
            MethodRow::from_result(OUR_METHOD, normal_row),
            MethodRow::from_result(OUR_METHOD_ROC, roc_row),
            MethodRow::from_result(PLUS_ONE, plus_one),
            MethodRow::from_result(ONLY_LABELED, only_labeled),
        ],
    })
}
