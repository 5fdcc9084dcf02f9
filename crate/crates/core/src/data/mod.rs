//! Tabular datasets: loading, writing, and the preprocessing sequence.

mod io;
mod preprocess;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_csv, write_csv, LoadReport};
pub use preprocess::{
    drop_constant_columns, pearson, pearson_flagged, preprocess, prune_collinear, prune_collinear_with, split,
    standardize, undersample_majority, CollinearRemoval, PreprocessOptions, PreprocessOutput,
    ScalerParams,
};
#[cfg(test)]
pub(crate) use preprocess::from_columns;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Feature table with per-row class labels.
///
/// Labels are stored as indices into `class_names`, which is kept sorted so
/// that two datasets drawn from the same source agree on class order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    matrix: Matrix,
    targets: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from text labels, checking every invariant.
    pub fn new(feature_names: Vec<String>, matrix: Matrix, labels: Vec<String>) -> Result<Self> {
        let class_names: Vec<String> = {
            let mut set: Vec<String> = labels.to_vec();
            set.sort();
            set.dedup();
            set
        };
        let index: BTreeMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let targets = labels.iter().map(|l| index[l.as_str()]).collect();
        Self::from_targets(feature_names, matrix, targets, class_names)
    }

    /// Builds a dataset from label indices into an explicit class list.
    pub fn from_targets(
        feature_names: Vec<String>,
        matrix: Matrix,
        targets: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if matrix.rows() != targets.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                matrix.rows(),
                targets.len()
            )));
        }
        if matrix.cols() != feature_names.len() {
            return Err(Error::InvalidDataset(format!(
                "{} columns but {} feature names",
                matrix.cols(),
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate feature name `{name}`"
                )));
            }
        }
        if let Some(pos) = matrix.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column `{}`",
                pos / matrix.cols().max(1),
                feature_names[pos % matrix.cols().max(1)]
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label index {t} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            feature_names,
            matrix,
            targets,
            class_names,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label(&self, row: usize) -> &str {
        &self.class_names[self.targets[row]]
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_rows()).map(|r| self.label(r).to_string()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.matrix.column(c)
    }

    /// Per-class row counts, indexed like `class_names`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &t in &self.targets {
            counts[t] += 1;
        }
        counts
    }

    pub fn distribution(&self) -> ClassDistribution {
        ClassDistribution::from_counts(&self.class_names, &self.class_counts())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n).ok_or_else(|| {
                    Error::InvalidArgument(format!("feature `{n}` not present in dataset"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_feature_indices(&idx))
    }

    pub fn select_feature_indices(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: idx.iter().map(|&i| self.feature_names[i].clone()).collect(),
            matrix: self.matrix.select_columns(idx),
            targets: self.targets.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Keeps the given rows (in the given order). The class list is unchanged.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            matrix: self.matrix.select_rows(rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub(crate) fn with_matrix(&self, feature_names: Vec<String>, matrix: Matrix) -> Dataset {
        Dataset {
            feature_names,
            matrix,
            targets: self.targets.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Per-class counts and percentages, in class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub classes: Vec<ClassShare>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub class: String,
    pub count: usize,
    pub percent: f64,
}

impl ClassDistribution {
    pub fn from_counts(classes: &[String], counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        let classes = classes
            .iter()
            .zip(counts)
            .map(|(c, &n)| ClassShare {
                class: c.clone(),
                count: n,
                percent: if total == 0 {
                    0.0
                } else {
                    100.0 * n as f64 / total as f64
                },
            })
            .collect();
        Self { classes, total }
    }

    pub fn count(&self, class: &str) -> Option<usize> {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map(|c| c.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        Dataset::new(
            vec!["a".into(), "b".into()],
            m,
            vec!["y".into(), "x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn class_names_are_sorted_and_counts_match() {
        let d = tiny();
        assert_eq!(d.class_names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(d.class_counts(), vec![1, 2]);
        assert_eq!(d.label(0), "y");
        let dist = d.distribution();
        assert_eq!(dist.total, 3);
        assert!((dist.classes.iter().map(|c| c.percent).sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn invariants_are_enforced() {
        let m = Matrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        assert!(Dataset::new(vec!["a".into(), "b".into()], m, vec!["x".into()]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(Dataset::new(vec!["a".into(), "a".into()], m.clone(), vec!["x".into()]).is_err());
        assert!(Dataset::new(vec!["a".into(), "b".into()], m, vec![]).is_err());
    }

    #[test]
    fn selection_keeps_labels() {
        let d = tiny();
        let s = d.select_features(&["b".to_string()]).unwrap();
        assert_eq!(s.column(0), vec![2.0, 4.0, 6.0]);
        let r = d.select_rows(&[2, 1]);
        assert_eq!(r.labels(), vec!["y", "x"]);
        assert!(d.select_features(&["zzz".to_string()]).is_err());
    }
}
