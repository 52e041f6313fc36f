//! One-vs-rest linear weights fitted by gradient descent on the
//! squared-exponential loss `L(x) = Σ_i exp(d_i²)`, `d = A·x − b`.
//!
//! The gradient is `∂L/∂x_j = Σ_i 2·exp(d_i²)·d_i·A_ij` and every accepted step
//! is `x ← x − ½·η·∂L/∂x`. The step size only ever shrinks: a candidate step
//! whose loss exceeds the current loss is retried with `η·lr_shrink`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSet;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::targets::TargetMatrix;

/// Retries of a single epoch before the learning rate is declared exhausted.
pub const MAX_BACKTRACK_RETRIES: usize = 60;

/// Smallest learning rate the backtracking loop will try.
pub const MIN_LEARNING_RATE: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub lr0: T,
    pub lr_shrink: T,
    pub tol: T,
    pub seed: u64,
    pub init_scale: T,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr0: T::lit(0.1),
            lr_shrink: T::lit(0.5),
            tol: T::lit(1e-9),
            seed: 0,
            init_scale: T::lit(0.01),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr0.is_finite() && self.lr0 > T::zero()) {
            return bad("lr0 must be finite and positive");
        }
        if !(self.lr_shrink > T::zero() && self.lr_shrink < T::one()) {
            return bad("lr_shrink must lie strictly between 0 and 1");
        }
        if !(self.tol.is_finite() && self.tol >= T::zero()) {
            return bad("tol must be finite and non-negative");
        }
        if !(self.init_scale.is_finite() && self.init_scale > T::zero()) {
            return bad("init_scale must be finite and positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Converged,
    LearningRateUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceEntry<T> {
    pub class_index: usize,
    pub epoch: usize,
    pub loss: T,
    pub learning_rate: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassFit<T> {
    pub weights: Array1<T>,
    pub trace: Vec<TraceEntry<T>>,
    pub initial_loss: T,
    pub final_loss: T,
    pub epochs_used: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainMeta<T> {
    pub config: TrainConfig<T>,
    pub negative_value: Option<T>,
    pub final_losses: Vec<T>,
    pub epochs_used: Vec<usize>,
    pub stop_reasons: Vec<StopReason>,
}

/// Trained linear head: column `j` of `weights` scores class `class_names[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel<T> {
    pub class_names: Vec<String>,
    pub weights: Array2<T>,
    pub train_meta: TrainMeta<T>,
}

impl<T: Scalar> ClassifierModel<T> {
    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }
}

fn shape_of(dims: &[usize]) -> String {
    let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    parts.join("x")
}

fn check_shapes<T>(a: &ArrayView2<T>, x: &ArrayView1<T>, b: &ArrayView1<T>) -> Result<()> {
    if a.ncols() != x.len() || a.nrows() != b.len() {
        return Err(Error::Shape {
            lhs: format!("A {}", shape_of(a.shape())),
            rhs: format!("x {}, b {}", x.len(), b.len()),
        });
    }
    Ok(())
}

/// `d = A·x − b`.
pub fn residual<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    check_shapes(&a, &x, &b)?;
    Ok(a.dot(&x) - b)
}

fn loss_of_residual<T: Scalar>(d: &Array1<T>) -> T {
    d.iter().fold(T::zero(), |acc, &di| acc + (di * di).exp())
}

/// `Σ_i exp(d_i²)`. Errors when a term overflows.
pub fn loss<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, b: ArrayView1<T>) -> Result<T> {
    let l = loss_of_residual(&residual(a, x, b)?);
    if l.is_finite() {
        Ok(l)
    } else {
        Err(Error::NonFiniteLoss)
    }
}

fn gradient_of_residual<T: Scalar>(a: &ArrayView2<T>, d: &Array1<T>) -> Array1<T> {
    let two = T::lit(2.0);
    let weighted = d.mapv(|di| two * di * (di * di).exp());
    a.t().dot(&weighted)
}

/// `g_j = Σ_i 2·exp(d_i²)·d_i·A_ij`.
pub fn loss_gradient<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    let d = residual(a.view(), x, b)?;
    let g = gradient_of_residual(&a, &d);
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFiniteLoss)
    }
}

/// Uniform weights in `[-init_scale, init_scale)` from the class seed.
pub fn initial_weights<T: Scalar>(dim: usize, init_scale: T, class_seed: u64) -> Array1<T> {
    let mut rng = SeededRng::new(class_seed);
    let scale = init_scale.as_f64();
    (0..dim).map(|_| T::lit(rng.symmetric(scale))).collect()
}

/// Fits one class column from a seeded random start.
pub fn train_class<T: Scalar>(
    features: ArrayView2<T>,
    target: ArrayView1<T>,
    cfg: &TrainConfig<T>,
    class_seed: u64,
) -> Result<ClassFit<T>> {
    let x0 = initial_weights(features.ncols(), cfg.init_scale, class_seed);
    descend(features, target, x0, cfg, 0)
}

/// Backtracking gradient descent from an explicit starting point.
pub fn descend<T: Scalar>(
    features: ArrayView2<T>,
    target: ArrayView1<T>,
    x0: Array1<T>,
    cfg: &TrainConfig<T>,
    class_index: usize,
) -> Result<ClassFit<T>> {
    cfg.validate()?;
    let mut x = x0;
    let mut d = residual(features, x.view(), target)?;
    let mut current = loss_of_residual(&d);
    if !current.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let initial_loss = current;
    let half = T::lit(0.5);
    let min_lr = T::lit(MIN_LEARNING_RATE);
    let mut lr = cfg.lr0;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let mut epochs_used = 0;

    'epochs: for epoch in 1..=cfg.epochs {
        let g = gradient_of_residual(&features, &d);
        let mut retries = 0;
        let (next_x, next_d, next_loss) = loop {
            let step = half * lr;
            let cand = &x - &g.mapv(|gj| gj * step);
            let cand_d = features.dot(&cand) - target;
            let cand_loss = loss_of_residual(&cand_d);
            if cand_loss.is_finite() && cand_loss <= current {
                break (cand, cand_d, cand_loss);
            }
            lr *= cfg.lr_shrink;
            retries += 1;
            if retries > MAX_BACKTRACK_RETRIES || lr < min_lr {
                stop = StopReason::LearningRateUnderflow;
                break 'epochs;
            }
        };
        let change = (current - next_loss).abs() / current;
        x = next_x;
        d = next_d;
        current = next_loss;
        epochs_used = epoch;
        trace.push(TraceEntry {
            class_index,
            epoch,
            loss: current,
            learning_rate: lr,
        });
        if change < cfg.tol {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(ClassFit {
        weights: x,
        trace,
        initial_loss,
        final_loss: current,
        epochs_used,
        stop,
    })
}

/// Trains every target column; see [`train_model_traced`].
pub fn train_model<T: Scalar>(
    data: &FeatureSet<T>,
    targets: &TargetMatrix<T>,
    cfg: &TrainConfig<T>,
) -> Result<ClassifierModel<T>> {
    train_model_traced(data, targets, cfg).map(|(model, _)| model)
}

/// Trains column `j` with seed `cfg.seed + j`. Columns run in parallel and are
/// assembled in class order.
#[allow(clippy::type_complexity)]
pub fn train_model_traced<T: Scalar>(
    data: &FeatureSet<T>,
    targets: &TargetMatrix<T>,
    cfg: &TrainConfig<T>,
) -> Result<(ClassifierModel<T>, Vec<Vec<TraceEntry<T>>>)> {
    cfg.validate()?;
    if targets.n_classes() == 0 {
        return Err(Error::EmptyModel);
    }
    if targets.n_rows() != data.len() {
        return Err(Error::Shape {
            lhs: format!("features {}", shape_of(&[data.len(), data.dim()])),
            rhs: format!("targets {}", shape_of(&[targets.n_rows(), targets.n_classes()])),
        });
    }
    let features = data.feature_matrix();
    let fits = (0..targets.n_classes())
        .into_par_iter()
        .map(|j| {
            let seed = cfg.seed.wrapping_add(j as u64);
            let x0 = initial_weights(features.ncols(), cfg.init_scale, seed);
            descend(features.view(), targets.column(j), x0, cfg, j)
                .map_err(|e| e.in_class(targets.class_names()[j].clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut weights = Array2::zeros((data.dim(), fits.len()));
    for (mut col, fit) in weights.axis_iter_mut(Axis(1)).zip(&fits) {
        col.assign(&fit.weights);
    }
    let negative_value = targets
        .row_kinds()
        .iter()
        .any(|k| matches!(k, Some(crate::targets::RowKind::Constant)))
        .then(|| targets.negative_value());
    let model = ClassifierModel {
        class_names: targets.class_names().to_vec(),
        weights,
        train_meta: TrainMeta {
            config: cfg.clone(),
            negative_value,
            final_losses: fits.iter().map(|f| f.final_loss).collect(),
            epochs_used: fits.iter().map(|f| f.epochs_used).collect(),
            stop_reasons: fits.iter().map(|f| f.stop).collect(),
        },
    };
    let traces = fits.into_iter().map(|f| f.trace).collect();
    Ok((model, traces))
}

/// On-disk model document. `weights[j]` is the weight vector of `class_names[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFile<T> {
    pub class_names: Vec<String>,
    pub dim: usize,
    pub weights: Vec<Vec<T>>,
    pub negative_value: Option<T>,
    pub train_meta: TrainMeta<T>,
}

impl<T: Scalar> From<&ClassifierModel<T>> for ModelFile<T> {
    fn from(m: &ClassifierModel<T>) -> Self {
        Self {
            class_names: m.class_names.clone(),
            dim: m.dim(),
            weights: m.weights.columns().into_iter().map(|c| c.to_vec()).collect(),
            negative_value: m.train_meta.negative_value,
            train_meta: m.train_meta.clone(),
        }
    }
}

impl<T: Scalar> TryFrom<ModelFile<T>> for ClassifierModel<T> {
    type Error = Error;

    fn try_from(f: ModelFile<T>) -> Result<Self> {
        if f.class_names.is_empty() {
            return Err(Error::EmptyModel);
        }
        if f.weights.len() != f.class_names.len() {
            return Err(Error::Shape {
                lhs: format!("{} class names", f.class_names.len()),
                rhs: format!("{} weight vectors", f.weights.len()),
            });
        }
        let mut weights = Array2::zeros((f.dim, f.class_names.len()));
        for (j, w) in f.weights.iter().enumerate() {
            if w.len() != f.dim {
                return Err(Error::Dimension {
                    expected: f.dim,
                    actual: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss.in_class(f.class_names[j].clone()));
            }
            weights.column_mut(j).assign(&ArrayView1::from(w.as_slice()));
        }
        let mut train_meta = f.train_meta;
        train_meta.negative_value = f.negative_value;
        Ok(Self {
            class_names: f.class_names,
            weights,
            train_meta,
        })
    }
}

pub fn save_model<T: Scalar>(model: &ClassifierModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(&ModelFile::from(model), path)
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<ClassifierModel<T>> {
    let file: ModelFile<T> = read_json(path)?;
    file.try_into()
}

pub(crate) fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<S: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<S> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
