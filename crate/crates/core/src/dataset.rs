//! Feature-vector corpora: CSV ingest, per-image min-max normalization and
//! seeded synthetic generation.
//!
//! A corpus file looks like
//!
//! ```text
//! id,label,f0,f1,f2
//! img-001,cat,0.1,0.5,1
//! img-002,__UNLABELED__,0,0.25,1
//! ```
//!
//! Every row is normalized on load, so downstream code can assume features in `[0, 1]`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Label column value for images outside every known class.
pub const UNLABELED_MARKER: &str = "__UNLABELED__";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Class(String),
    Unlabeled,
}

impl Label {
    /// Parses a label cell, enforcing the class-name charset.
    pub fn parse(raw: &str) -> Result<Self> {
        if raw == UNLABELED_MARKER {
            return Ok(Label::Unlabeled);
        }
        validate_name(raw)?;
        Ok(Label::Class(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Class(name) => name,
            Label::Unlabeled => UNLABELED_MARKER,
        }
    }

    pub fn class_name(&self) -> Option<&str> {
        match self {
            Label::Class(name) => Some(name),
            Label::Unlabeled => None,
        }
    }

    pub fn is_labeled(&self) -> bool {
        matches!(self, Label::Class(_))
    }
}

fn validate_name(raw: &str) -> Result<()> {
    let bad = |reason| {
        Err(Error::InvalidLabel {
            label: raw.to_string(),
            reason,
        })
    };
    if raw.is_empty() {
        return bad("empty");
    }
    if raw.contains(',') {
        return bad("contains a comma");
    }
    if raw.trim() != raw {
        return bad("leading or trailing whitespace");
    }
    if raw.contains(['\n', '\r', '"']) {
        return bad("contains a quote or line break");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord<T> {
    pub id: String,
    pub label: Label,
    pub features: Vec<T>,
}

/// An ordered corpus of records sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    records: Vec<FeatureRecord<T>>,
    dim: usize,
    class_names: Vec<String>,
}

impl<T: Scalar> FeatureSet<T> {
    /// Builds a set from records, checking dimensions, ids and labels.
    ///
    /// Class names are collected in first-appearance order. `dim` is required so
    /// that an empty set still carries its dimension.
    pub fn new(dim: usize, records: Vec<FeatureRecord<T>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut class_names: Vec<String> = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.features.len() != dim {
                return Err(Error::Format {
                    row: i,
                    message: format!(
                        "record {:?} has {} features, expected {dim}",
                        rec.id,
                        rec.features.len()
                    ),
                });
            }
            validate_name(&rec.id).map_err(|e| e.in_record(rec.id.clone()))?;
            if !seen.insert(rec.id.as_str()) {
                return Err(Error::Format {
                    row: i,
                    message: format!("duplicate id {:?}", rec.id),
                });
            }
            if let Label::Class(name) = &rec.label {
                validate_name(name)?;
                if !class_names.iter().any(|c| c == name) {
                    class_names.push(name.clone());
                }
            }
        }
        Ok(Self {
            records,
            dim,
            class_names,
        })
    }

    pub fn records(&self) -> &[FeatureRecord<T>] {
        &self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_labeled()).count()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.len() - self.labeled_count()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// N_img × D matrix of the features, rows in record order.
    pub fn feature_matrix(&self) -> Array2<T> {
        let mut m = Array2::zeros((self.len(), self.dim));
        for (mut row, rec) in m.rows_mut().into_iter().zip(&self.records) {
            for (dst, &src) in row.iter_mut().zip(&rec.features) {
                *dst = src;
            }
        }
        m
    }

    /// The labeled records only, order preserved.
    pub fn labeled_subset(&self) -> Self {
        let records = self.records.iter().filter(|r| r.label.is_labeled()).cloned().collect();
        Self::new(self.dim, records).expect("subset of a valid set is valid")
    }
}

/// Per-image min-max scaling to `[0, 1]`; a constant vector maps to all zeros.
pub fn normalize_features<T: Scalar>(raw: &[T]) -> Result<Vec<T>> {
    if raw.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature { index });
    }
    let (lo, hi) = raw.iter().fold((raw[0], raw[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if span == T::zero() {
        return Ok(vec![T::zero(); raw.len()]);
    }
    Ok(raw.iter().map(|&v| (v - lo) / span).collect())
}

/// Reads and normalizes a feature CSV.
pub fn load_feature_set<T: Scalar>(path: impl AsRef<Path>) -> Result<FeatureSet<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_set(BufReader::new(file))
}

pub fn read_feature_set<T: Scalar, R: Read>(reader: R) -> Result<FeatureSet<T>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = csv.records();

    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Format {
                row: 1,
                message: "missing header".into(),
            })
        }
    };
    let dim = parse_header(&header)?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let fmt_err = |message: String| Error::Format { row: line, message };
        if row.len() != dim + 2 {
            return Err(fmt_err(format!("expected {} columns, found {}", dim + 2, row.len())));
        }
        let id = row[0].to_string();
        validate_name(&id).map_err(|e| fmt_err(e.to_string()))?;
        if !seen.insert(id.clone()) {
            return Err(fmt_err(format!("duplicate id {id:?}")));
        }
        let label = Label::parse(&row[1]).map_err(|e| fmt_err(e.to_string()))?;
        let raw = row
            .iter()
            .skip(2)
            .enumerate()
            .map(|(i, cell)| {
                cell.trim()
                    .parse::<T>()
                    .map_err(|_| fmt_err(format!("feature f{i}: cannot parse {cell:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        let features = normalize_features(&raw).map_err(|e| fmt_err(e.to_string()))?;
        records.push(FeatureRecord { id, label, features });
    }
    FeatureSet::new(dim, records)
}

fn parse_header(header: &csv::StringRecord) -> Result<usize> {
    let err = |message: String| Error::Format { row: 1, message };
    if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
        return Err(err(
            "header must start with id,label and name at least one feature".into()
        ));
    }
    for (i, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{i}") {
            return Err(err(format!("expected column f{i}, found {name:?}")));
        }
    }
    Ok(header.len() - 2)
}

pub fn write_feature_set<T: Scalar>(set: &FeatureSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_feature_set_to(set, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_feature_set_to<T: Scalar, W: Write>(set: &FeatureSet<T>, writer: W) -> Result<()> {
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..set.dim()).map(|i| format!("f{i}")));
    csv.write_record(&header)?;
    for rec in set.records() {
        let mut row = Vec::with_capacity(set.dim() + 2);
        row.push(rec.id.clone());
        row.push(rec.label.as_str().to_string());
        // Display prints the shortest string that parses back to the same value.
        row.extend(rec.features.iter().map(|v| v.to_string()));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// Parameters of a synthetic corpus made of Gaussian blobs around uniform means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rel: usize,
    pub n_irr: usize,
    pub dim: usize,
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub spread: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rel < 1 {
            return Err(Error::InvalidSynthSpec("n_rel must be at least 1"));
        }
        if self.dim < 2 {
            return Err(Error::InvalidSynthSpec("dim must be at least 2"));
        }
        if self.per_class_train < 1 {
            return Err(Error::InvalidSynthSpec("per_class_train must be at least 1"));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::InvalidSynthSpec("spread must be finite and positive"));
        }
        Ok(())
    }
}

/// Seeded train/validation corpora.
///
/// Draw order from a single stream: first every category mean (relevant
/// categories, then irrelevant, `dim` uniforms each), then every training
/// image category by category, then every validation image in the same order.
/// Each image takes one Gaussian per feature. Relevant categories are named
/// `R00, R01, ...`; irrelevant ones carry the unlabeled marker in both splits.
pub fn generate_synthetic<T: Scalar>(spec: &SynthSpec) -> Result<(FeatureSet<T>, FeatureSet<T>)> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let n_cat = spec.n_rel + spec.n_irr;
    let width = digits(spec.n_rel.max(spec.n_irr).saturating_sub(1)).max(2);

    let means: Vec<Vec<f64>> = (0..n_cat)
        .map(|_| (0..spec.dim).map(|_| rng.uniform()).collect())
        .collect();

    let category = |c: usize| -> (String, Label) {
        if c < spec.n_rel {
            let name = format!("R{c:0width$}");
            (name.clone(), Label::Class(name))
        } else {
            (format!("I{:0width$}", c - spec.n_rel), Label::Unlabeled)
        }
    };

    let mut split = |tag: &str, per_class: usize| -> Result<FeatureSet<T>> {
        let mut records = Vec::with_capacity(n_cat * per_class);
        for (c, mean) in means.iter().enumerate() {
            let (cat, label) = category(c);
            for k in 0..per_class {
                let raw: Vec<T> = mean.iter().map(|&m| T::lit(m + spec.spread * rng.gaussian())).collect();
                records.push(FeatureRecord {
                    id: format!("{tag}-{cat}-{k:03}"),
                    label: label.clone(),
                    features: normalize_features(&raw)?,
                });
            }
        }
        FeatureSet::new(spec.dim, records)
    };

    let train = split("train", spec.per_class_train)?;
    let val = split("val", spec.per_class_val)?;
    Ok((train, val))
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}
