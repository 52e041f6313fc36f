//! Open-set decision rule: assign the argmax class, then reject the image as
//! irrelevant when its top score falls below that class's threshold.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSet;
use crate::error::{Error, Result};
use crate::roc::ThresholdSet;
use crate::scalar::Scalar;
use crate::trainer::ClassifierModel;

/// Raw linear scores of one image. Scores are not normalized to probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoreVector<T> {
    pub id: String,
    pub scores: Vec<T>,
    pub top_class: usize,
    pub top_score: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Relevant(String),
    Irrelevant,
}

impl Verdict {
    pub fn is_relevant(&self) -> bool {
        matches!(self, Verdict::Relevant(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Decision<T> {
    pub id: String,
    pub verdict: Verdict,
    pub top_class: usize,
    pub top_score: T,
    /// `None` when the verdict came from argmax alone.
    pub threshold: Option<T>,
}

/// Index and value of the maximum; the smallest index wins ties.
pub fn argmax<T: Scalar>(scores: &[T]) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (j, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((j, s)),
        }
    }
    best
}

pub fn score<T: Scalar>(model: &ClassifierModel<T>, id: &str, features: &[T]) -> Result<ScoreVector<T>> {
    if features.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            actual: features.len(),
        });
    }
    if model.n_classes() == 0 {
        return Err(Error::EmptyModel);
    }
    let scores: Vec<T> = model
        .weights
        .columns()
        .into_iter()
        .map(|w| w.iter().zip(features).fold(T::zero(), |acc, (&wk, &fk)| acc + wk * fk))
        .collect();
    let (top_class, top_score) = argmax(&scores).expect("at least one class");
    Ok(ScoreVector {
        id: id.to_string(),
        scores,
        top_class,
        top_score,
    })
}

/// Relevant iff `top_score >= threshold[top_class]`.
pub fn decide<T: Scalar>(sv: &ScoreVector<T>, thresholds: &ThresholdSet<T>) -> Result<Decision<T>> {
    let entry = thresholds
        .entries
        .get(sv.top_class)
        .ok_or(Error::MissingThreshold(sv.top_class))?;
    let verdict = if sv.top_score >= entry.threshold {
        Verdict::Relevant(entry.class_name.clone())
    } else {
        Verdict::Irrelevant
    };
    Ok(Decision {
        id: sv.id.clone(),
        verdict,
        top_class: sv.top_class,
        top_score: sv.top_score,
        threshold: Some(entry.threshold),
    })
}

pub fn classify_set<T: Scalar>(
    model: &ClassifierModel<T>,
    data: &FeatureSet<T>,
    thresholds: &ThresholdSet<T>,
) -> Result<Vec<Decision<T>>> {
    if thresholds.entries.len() < model.n_classes() {
        return Err(Error::MissingThreshold(thresholds.entries.len()));
    }
    data.records()
        .iter()
        .map(|rec| {
            score(model, &rec.id, &rec.features)
                .and_then(|sv| decide(&sv, thresholds))
                .map_err(|e| e.in_record(rec.id.clone()))
        })
        .collect()
}

/// Writes `id,verdict,top_class,top_score,threshold`; the threshold cell is
/// empty for argmax-only decisions.
pub fn write_decisions<T: Scalar>(
    decisions: &[Decision<T>],
    class_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    csv.write_record(["id", "verdict", "top_class", "top_score", "threshold"])?;
    for d in decisions {
        let verdict = match d.verdict {
            Verdict::Relevant(_) => "relevant",
            Verdict::Irrelevant => "irrelevant",
        };
        let class = class_names
            .get(d.top_class)
            .cloned()
            .unwrap_or_else(|| d.top_class.to_string());
        let threshold = d.threshold.map(|t| t.to_string()).unwrap_or_default();
        csv.write_record([
            d.id.as_str(),
            verdict,
            class.as_str(),
            d.top_score.to_string().as_str(),
            threshold.as_str(),
        ])?;
    }
    let mut inner = csv.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
