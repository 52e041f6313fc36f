//! Training targets: one-hot rows for labeled images, constant rows for unlabeled ones.

use log::warn;
use ndarray::{Array2, ArrayView1};

use crate::dataset::{FeatureSet, Label};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default constant for unlabeled rows.
pub const DEFAULT_NEGATIVE_VALUE: f64 = -0.2;

/// Class name given to the extra column of the "+1 class" baseline.
pub const CATCH_ALL_CLASS: &str = "__IRRELEVANT__";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    OneHot(usize),
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix<T> {
    values: Array2<T>,
    class_names: Vec<String>,
    negative_value: T,
}

impl<T: Scalar> TargetMatrix<T> {
    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn negative_value(&self) -> T {
        self.negative_value
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    /// Classifies each row as one-hot or constant. Ambiguous when the
    /// negative value is 0 or 1 and there is a single class.
    pub fn row_kinds(&self) -> Vec<Option<RowKind>> {
        self.values
            .rows()
            .into_iter()
            .map(|row| {
                if row.iter().all(|&v| v == self.negative_value) {
                    return Some(RowKind::Constant);
                }
                let ones: Vec<usize> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == T::one())
                    .map(|(j, _)| j)
                    .collect();
                let zeros = row.iter().filter(|&&v| v == T::zero()).count();
                (ones.len() == 1 && zeros + 1 == row.len()).then(|| RowKind::OneHot(ones[0]))
            })
            .collect()
    }
}

/// One-hot rows for labeled records, `negative_value` rows for unlabeled ones.
pub fn build_target_matrix<T: Scalar>(data: &FeatureSet<T>, negative_value: T) -> Result<TargetMatrix<T>> {
    if !negative_value.is_finite() {
        return Err(Error::InvalidConfig("negative target value must be finite".into()));
    }
    if data.labeled_count() == 0 {
        return Err(Error::NoLabeledRecords);
    }
    if data.unlabeled_count() > 0 && (negative_value == T::zero() || negative_value == T::one()) {
        warn!("negative target value {negative_value} makes unlabeled rows indistinguishable from one-hot entries");
    }
    let n_class = data.class_names().len();
    let mut values = Array2::zeros((data.len(), n_class));
    for (i, rec) in data.records().iter().enumerate() {
        match &rec.label {
            Label::Class(name) => {
                let j = data
                    .class_index(name)
                    .ok_or_else(|| Error::UnknownClass(name.clone()))?;
                values[[i, j]] = T::one();
            }
            Label::Unlabeled => values.row_mut(i).fill(negative_value),
        }
    }
    Ok(TargetMatrix {
        values,
        class_names: data.class_names().to_vec(),
        negative_value,
    })
}

/// Targets for the "+1 class" baseline: unlabeled records become one-hot in an
/// extra trailing catch-all column.
pub fn build_plus_one_targets<T: Scalar>(data: &FeatureSet<T>) -> Result<TargetMatrix<T>> {
    if data.labeled_count() == 0 {
        return Err(Error::NoLabeledRecords);
    }
    let n_class = data.class_names().len();
    let mut values = Array2::zeros((data.len(), n_class + 1));
    for (i, rec) in data.records().iter().enumerate() {
        let j = match &rec.label {
            Label::Class(name) => data
                .class_index(name)
                .ok_or_else(|| Error::UnknownClass(name.clone()))?,
            Label::Unlabeled => n_class,
        };
        values[[i, j]] = T::one();
    }
    let mut class_names = data.class_names().to_vec();
    class_names.push(CATCH_ALL_CLASS.to_string());
    Ok(TargetMatrix {
        values,
        class_names,
        negative_value: T::zero(),
    })
}
