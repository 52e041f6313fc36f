//! Per-class rejection thresholds calibrated on training scores.
//!
//! For class `c` the positives are scores at `c` of labeled images whose true
//! class is `c` and whose argmax is `c`; the negatives are scores at `c` of
//! unlabeled images whose argmax is `c`. Sweeping a threshold over these two
//! pools gives the (FRR, TRR) curve.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::score;
use crate::dataset::{FeatureSet, Label};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trainer::{read_json, write_json, ClassifierModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScorePool<T> {
    pub class_index: usize,
    pub positives: Vec<T>,
    pub negatives: Vec<T>,
    /// Scores at this class of every labeled image of this class, whatever its argmax.
    pub all_relevant: Vec<T>,
}

impl<T> ClassScorePool<T> {
    pub fn new(class_index: usize, positives: Vec<T>, negatives: Vec<T>) -> Self {
        Self {
            class_index,
            positives,
            negatives,
            all_relevant: Vec::new(),
        }
    }
}

/// Scores every training record once and files it under its argmax class.
pub fn collect_pools<T: Scalar>(model: &ClassifierModel<T>, train: &FeatureSet<T>) -> Result<Vec<ClassScorePool<T>>> {
    let mut pools: Vec<ClassScorePool<T>> = (0..model.n_classes())
        .map(|c| ClassScorePool::new(c, Vec::new(), Vec::new()))
        .collect();
    for rec in train.records() {
        let sv = score(model, &rec.id, &rec.features).map_err(|e| e.in_record(rec.id.clone()))?;
        match &rec.label {
            Label::Class(name) => {
                let truth = model
                    .class_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::UnknownClass(name.clone()).in_record(rec.id.clone()))?;
                pools[truth].all_relevant.push(sv.scores[truth]);
                if sv.top_class == truth {
                    pools[truth].positives.push(sv.top_score);
                }
            }
            Label::Unlabeled => pools[sv.top_class].negatives.push(sv.top_score),
        }
    }
    Ok(pools)
}

/// `TRR = TP/(TP+FN)`, `FRR = FP/(FP+TN)`; an empty denominator yields 0.
pub fn trr_frr<T: Scalar>(tp: usize, fn_: usize, fp: usize, tn: usize) -> (T, T) {
    let rate = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            T::from_count(num) / T::from_count(den)
        }
    };
    (rate(tp, tp + fn_), rate(fp, fp + tn))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RocPoint<T> {
    pub threshold: T,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub trr: T,
    pub frr: T,
}

impl<T: Scalar> RocPoint<T> {
    fn at(threshold: T, pos_sorted: &[T], neg_sorted: &[T]) -> Self {
        let below = |xs: &[T]| xs.partition_point(|&v| v < threshold);
        let fn_ = below(pos_sorted);
        let tn = below(neg_sorted);
        let tp = pos_sorted.len() - fn_;
        let fp = neg_sorted.len() - tn;
        let (trr, frr) = trr_frr(tp, fn_, fp, tn);
        Self {
            threshold,
            tp,
            fn_,
            fp,
            tn,
            trr,
            frr,
        }
    }

    fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    /// `(TRR − FRR)·P·N` as an exact integer.
    fn scaled_objective(&self) -> i128 {
        self.tp as i128 * self.negatives() as i128 - self.fp as i128 * self.positives() as i128
    }

    pub fn objective(&self) -> T {
        self.trr - self.frr
    }
}

/// Points are ordered by decreasing threshold, starting at a sentinel above
/// every score, so TRR and FRR are non-decreasing along the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RocCurve<T> {
    pub class_index: usize,
    pub points: Vec<RocPoint<T>>,
    pub auc: T,
}

fn sorted<T: Scalar>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    v
}

pub fn build_roc<T: Scalar>(pool: &ClassScorePool<T>) -> Result<RocCurve<T>> {
    if pool.positives.is_empty() || pool.negatives.is_empty() {
        return Err(Error::FallbackNeeded);
    }
    let pos = sorted(&pool.positives);
    let neg = sorted(&pool.negatives);
    let mut candidates: Vec<T> = pos.iter().chain(&neg).copied().collect();
    candidates.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    candidates.dedup();

    let mut points = Vec::with_capacity(candidates.len() + 1);
    points.push(RocPoint::at(T::pos_sentinel(), &pos, &neg));
    points.extend(candidates.into_iter().map(|t| RocPoint::at(t, &pos, &neg)));
    let auc = trapezoid_auc(&points);
    Ok(RocCurve {
        class_index: pool.class_index,
        points,
        auc,
    })
}

/// Trapezoid rule over points sorted by (FRR, TRR), accumulated in integer
/// count units and divided once, so the result equals the Mann–Whitney
/// fraction with ties counted as ½.
fn trapezoid_auc<T: Scalar>(points: &[RocPoint<T>]) -> T {
    let mut by_frr: Vec<&RocPoint<T>> = points.iter().collect();
    by_frr.sort_by_key(|p| (p.fp, p.tp));
    let (p, n) = (by_frr[0].positives() as u128, by_frr[0].negatives() as u128);
    let twice_area: u128 = by_frr
        .windows(2)
        .map(|w| (w[1].fp - w[0].fp) as u128 * (w[0].tp + w[1].tp) as u128)
        .sum();
    let num = T::from_u128(twice_area).expect("count fits scalar");
    let den = T::from_u128(2 * p * n).expect("count fits scalar");
    num / den
}

/// Lowest positive score; training TRR is 1 at this threshold.
pub fn normal_threshold<T: Scalar>(pool: &ClassScorePool<T>) -> Result<T> {
    pool.positives
        .iter()
        .copied()
        .reduce(T::min)
        .ok_or(Error::FallbackNeeded)
}

/// Point maximizing `TRR − FRR`, optionally restricted to `TRR >= q`.
/// Ties go to the higher TRR, then to the lower threshold.
pub fn roc_threshold<T: Scalar>(curve: &RocCurve<T>, constraint: Option<f64>) -> Result<(T, RocPoint<T>)> {
    if let Some(q) = constraint {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!("constraint {q} outside [0, 1]")));
        }
    }
    let feasible = |p: &RocPoint<T>| match constraint {
        None => true,
        Some(q) => p.positives() > 0 && p.tp as f64 / p.positives() as f64 >= q,
    };
    let best = curve.points.iter().filter(|p| feasible(p)).max_by(|a, b| {
        a.scaled_objective()
            .cmp(&b.scaled_objective())
            .then(a.tp.cmp(&b.tp))
            .then(b.threshold.partial_cmp(&a.threshold).expect("finite thresholds"))
    });
    match best {
        Some(p) => Ok((p.threshold, *p)),
        None => {
            let max_trr = curve.points.iter().map(|p| p.trr.as_f64()).fold(0.0, f64::max);
            Err(Error::ConstraintUnreachable {
                constraint: constraint.unwrap_or(0.0),
                max_trr,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Normal,
    RocOptimal,
    RocConstrained { constraint: f64 },
    None,
}

impl Strategy {
    pub fn constraint(&self) -> Option<f64> {
        match self {
            Strategy::RocConstrained { constraint } => Some(*constraint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Minimum correctly classified positive.
    Normal,
    /// Chosen ROC point.
    Roc,
    /// ROC requested but the class attracted no unlabeled images.
    NormalNoNegatives,
    /// No positives; minimum score of every labeled image of the class.
    AllRelevantMinimum,
    /// No labeled evidence at all; the class never claims an image.
    NeverClaims,
    Disabled,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassThreshold<T> {
    pub class_index: usize,
    pub class_name: String,
    pub threshold: T,
    pub source: ThresholdSource,
    pub point: Option<RocPoint<T>>,
    pub auc: Option<T>,
}

/// One threshold per model class, in model class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ThresholdSet<T> {
    pub strategy: Strategy,
    pub entries: Vec<ClassThreshold<T>>,
}

impl<T: Scalar> ThresholdSet<T> {
    pub fn fixed(class_names: &[String], values: &[T], strategy: Strategy) -> Self {
        let entries = class_names
            .iter()
            .zip(values)
            .enumerate()
            .map(|(j, (name, &threshold))| ClassThreshold {
                class_index: j,
                class_name: name.clone(),
                threshold,
                source: ThresholdSource::Fixed,
                point: None,
                auc: None,
            })
            .collect();
        Self { strategy, entries }
    }

    /// Every class accepts every score.
    pub fn disabled(class_names: &[String]) -> Self {
        let mut set = Self::fixed(class_names, &vec![T::neg_sentinel(); class_names.len()], Strategy::None);
        set.entries
            .iter_mut()
            .for_each(|e| e.source = ThresholdSource::Disabled);
        set
    }

    /// Every class rejects every score.
    pub fn saturated(class_names: &[String]) -> Self {
        Self::fixed(class_names, &vec![T::pos_sentinel(); class_names.len()], Strategy::None)
    }

    pub fn values(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.threshold).collect()
    }
}

pub fn calibrate<T: Scalar>(
    model: &ClassifierModel<T>,
    train: &FeatureSet<T>,
    strategy: Strategy,
) -> Result<ThresholdSet<T>> {
    calibrate_with_curves(model, train, strategy).map(|(set, _)| set)
}

/// Calibrates and also returns each class's ROC curve when one could be built.
#[allow(clippy::type_complexity)]
pub fn calibrate_with_curves<T: Scalar>(
    model: &ClassifierModel<T>,
    train: &FeatureSet<T>,
    strategy: Strategy,
) -> Result<(ThresholdSet<T>, Vec<Option<RocCurve<T>>>)> {
    if strategy == Strategy::None {
        return Ok((
            ThresholdSet::disabled(&model.class_names),
            vec![None; model.n_classes()],
        ));
    }
    let pools = collect_pools(model, train)?;
    let mut entries = Vec::with_capacity(pools.len());
    let mut curves = Vec::with_capacity(pools.len());
    for pool in &pools {
        let name = &model.class_names[pool.class_index];
        let (entry, curve) = calibrate_class(pool, name, strategy).map_err(|e| e.in_class(name.clone()))?;
        entries.push(entry);
        curves.push(curve);
    }
    Ok((ThresholdSet { strategy, entries }, curves))
}

fn calibrate_class<T: Scalar>(
    pool: &ClassScorePool<T>,
    name: &str,
    strategy: Strategy,
) -> Result<(ClassThreshold<T>, Option<RocCurve<T>>)> {
    let entry = |threshold, source, point, auc| ClassThreshold {
        class_index: pool.class_index,
        class_name: name.to_string(),
        threshold,
        source,
        point,
        auc,
    };
    let Ok(normal) = normal_threshold(pool) else {
        let (threshold, source) = match pool.all_relevant.iter().copied().reduce(T::min) {
            Some(t) => (t, ThresholdSource::AllRelevantMinimum),
            None => (T::pos_sentinel(), ThresholdSource::NeverClaims),
        };
        return Ok((entry(threshold, source, None, None), None));
    };
    if strategy == Strategy::Normal {
        return Ok((entry(normal, ThresholdSource::Normal, None, None), None));
    }
    let curve = match build_roc(pool) {
        Ok(c) => c,
        Err(Error::FallbackNeeded) => return Ok((entry(normal, ThresholdSource::NormalNoNegatives, None, None), None)),
        Err(e) => return Err(e),
    };
    let (threshold, point) = roc_threshold(&curve, strategy.constraint())?;
    debug_assert!(
        point.scaled_objective()
            >= curve
                .points
                .iter()
                .find(|p| p.threshold == normal)
                .map_or(i128::MIN, |p| p.scaled_objective())
            || strategy.constraint().is_some()
    );
    Ok((
        entry(threshold, ThresholdSource::Roc, Some(point), Some(curve.auc)),
        Some(curve),
    ))
}

/// The point a given threshold selects on a curve, if it is one of the candidates.
pub fn point_at<T: Scalar>(curve: &RocCurve<T>, threshold: T) -> Option<&RocPoint<T>> {
    curve.points.iter().find(|p| p.threshold == threshold)
}

pub fn save_thresholds<T: Scalar>(set: &ThresholdSet<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(set, path)
}

pub fn load_thresholds<T: Scalar>(path: impl AsRef<Path>) -> Result<ThresholdSet<T>> {
    read_json(path)
}

/// Writes `roc_<index>.csv` (`class,threshold,trr,frr`) for every class with a
/// curve, plus `roc_summary.csv` with one line per class.
pub fn write_roc_dump<T: Scalar>(
    dir: impl AsRef<Path>,
    set: &ThresholdSet<T>,
    curves: &[Option<RocCurve<T>>],
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_writer = |path: &Path| -> Result<csv::Writer<BufWriter<File>>> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file)))
    };
    let finish = |w: csv::Writer<BufWriter<File>>, path: &Path| -> Result<()> {
        let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        inner.flush().map_err(|e| Error::io(path, e))
    };

    for (entry, curve) in set.entries.iter().zip(curves) {
        let Some(curve) = curve else { continue };
        let path = dir.join(format!("roc_{:03}.csv", entry.class_index));
        let mut w = csv_writer(&path)?;
        w.write_record(["class", "threshold", "trr", "frr"])?;
        for p in &curve.points {
            w.write_record([
                entry.class_name.clone(),
                p.threshold.to_string(),
                p.trr.to_string(),
                p.frr.to_string(),
            ])?;
        }
        finish(w, &path)?;
    }

    let path = dir.join("roc_summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["class", "auc", "threshold", "trr", "frr", "source"])?;
    for (entry, curve) in set.entries.iter().zip(curves) {
        let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        let source = serde_json::to_value(entry.source)?;
        w.write_record([
            entry.class_name.clone(),
            opt(curve.as_ref().map(|c| c.auc)),
            entry.threshold.to_string(),
            opt(entry.point.map(|p| p.trr)),
            opt(entry.point.map(|p| p.frr)),
            source.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    finish(w, &path)
}
