//! Tabular datasets: CSV ingestion, normalization, stratified splits, and a
//! synthetic biased-data generator.

mod csv_loader;
mod split;
mod synthetic;

pub use csv_loader::{load_csv, CsvSchema};
pub use split::{split, Split};
pub use synthetic::make_synthetic;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A labeled tabular dataset with a sensitive attribute.
///
/// `y` holds binary utility labels, `s` sensitive class indices in
/// `0..n_sensitive_classes`. Immutable after construction except for
/// [`Dataset::normalize`], which rescales feature columns in place once.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub s: Vec<usize>,
    pub feature_names: Vec<String>,
    pub sensitive_name: String,
    pub n_sensitive_classes: usize,
    norm: Option<Normalization>,
}

/// Per-column z-score parameters, fit on the training part only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Normalization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Which columns were rescaled (raw numeric columns; one-hot indicator
    /// columns and the sensitive-index column are left as 0/1 codes).
    pub scaled: Vec<bool>,
}

impl Dataset {
    /// Assemble a dataset, checking the structural invariants.
    pub fn new(
        x: Matrix,
        y: Vec<u8>,
        s: Vec<usize>,
        feature_names: Vec<String>,
        sensitive_name: String,
        n_sensitive_classes: usize,
    ) -> Result<Self> {
        let n = x.rows();
        if y.len() != n || s.len() != n {
            return Err(Error::Domain(format!(
                "label/sensitive lengths ({}, {}) do not match {} rows",
                y.len(),
                s.len(),
                n
            )));
        }
        if x.cols() == 0 {
            return Err(Error::Domain("dataset needs at least one feature".into()));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::Domain(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.cols()
            )));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Domain("utility labels must be 0 or 1".into()));
        }
        if n_sensitive_classes < 2 {
            return Err(Error::Schema(
                "need at least two sensitive classes".into(),
            ));
        }
        let mut seen = vec![false; n_sensitive_classes];
        for &cls in &s {
            if cls >= n_sensitive_classes {
                return Err(Error::Schema(format!(
                    "sensitive class {cls} out of range 0..{n_sensitive_classes}"
                )));
            }
            seen[cls] = true;
        }
        if let Some(missing) = seen.iter().position(|&b| !b) {
            return Err(Error::Schema(format!(
                "sensitive class {missing} has no instances"
            )));
        }
        Ok(Dataset {
            x,
            y,
            s,
            feature_names,
            sensitive_name,
            n_sensitive_classes,
            norm: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.norm.as_ref()
    }

    /// Z-score the scalable feature columns using statistics from the
    /// train part of `split`, then apply them to every row. Stores the
    /// parameters so raw values can be recovered. Columns with (near) zero
    /// train variance keep std 1. Calling twice is an error.
    pub fn normalize(&mut self, split: &Split) -> Result<()> {
        self.normalize_columns(split, |name| !name.contains('='))
    }

    /// Like [`Dataset::normalize`] but with an explicit per-column choice.
    pub fn normalize_columns(
        &mut self,
        split: &Split,
        mut scale_column: impl FnMut(&str) -> bool,
    ) -> Result<()> {
        if self.norm.is_some() {
            return Err(Error::Domain("dataset is already normalized".into()));
        }
        let d = self.dim();
        let mut means = vec![0.0; d];
        let mut stds = vec![1.0; d];
        let scaled: Vec<bool> = self
            .feature_names
            .iter()
            .map(|name| scale_column(name))
            .collect();
        let train = &split.train;
        if train.is_empty() {
            return Err(Error::Domain("empty train part".into()));
        }
        for c in 0..d {
            if !scaled[c] {
                continue;
            }
            let mean =
                train.iter().map(|&r| self.x.get(r, c)).sum::<f64>() / train.len() as f64;
            let var = train
                .iter()
                .map(|&r| {
                    let v = self.x.get(r, c) - mean;
                    v * v
                })
                .sum::<f64>()
                / train.len() as f64;
            means[c] = mean;
            stds[c] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        for r in 0..self.len() {
            for c in 0..d {
                if scaled[c] {
                    let v = (self.x.get(r, c) - means[c]) / stds[c];
                    self.x.set(r, c, v);
                }
            }
        }
        self.norm = Some(Normalization {
            means,
            stds,
            scaled,
        });
        Ok(())
    }

    /// Reconstruct the raw (pre-normalization) feature matrix.
    pub fn denormalized(&self) -> Matrix {
        match &self.norm {
            None => self.x.clone(),
            Some(norm) => {
                let mut out = self.x.clone();
                for r in 0..out.rows() {
                    for c in 0..out.cols() {
                        if norm.scaled[c] {
                            let v = out.get(r, c) * norm.stds[c] + norm.means[c];
                            out.set(r, c, v);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Indices of a viewed set partitioned by (utility class, sensitive class).
#[derive(Debug, Clone)]
pub struct SubgroupView {
    cells: BTreeMap<(u8, usize), Vec<usize>>,
    n_sensitive_classes: usize,
    viewed: usize,
}

impl SubgroupView {
    /// Partition `indices` (positions into `y`/`s`) by their (y, s) pair.
    ///
    /// The stored cell members are positions **within** `indices`, i.e.
    /// row numbers of a matrix built with `select_rows(indices)`.
    pub fn new(y: &[u8], s: &[usize], indices: &[usize], n_sensitive_classes: usize) -> Self {
        let mut cells: BTreeMap<(u8, usize), Vec<usize>> = BTreeMap::new();
        for (local, &global) in indices.iter().enumerate() {
            cells
                .entry((y[global], s[global]))
                .or_default()
                .push(local);
        }
        SubgroupView {
            cells,
            n_sensitive_classes,
            viewed: indices.len(),
        }
    }

    /// View over an entire dataset (cells hold dataset row indices).
    pub fn of_dataset(ds: &Dataset) -> Self {
        let all: Vec<usize> = (0..ds.len()).collect();
        SubgroupView::new(&ds.y, &ds.s, &all, ds.n_sensitive_classes)
    }

    pub fn n_sensitive_classes(&self) -> usize {
        self.n_sensitive_classes
    }

    /// Rows with this (utility, sensitive) pair; empty slice if none.
    pub fn cell(&self, y: u8, s: usize) -> &[usize] {
        self.cells.get(&(y, s)).map_or(&[], |v| v.as_slice())
    }

    /// All rows of one sensitive class regardless of utility label.
    pub fn group(&self, s: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .cells
            .iter()
            .filter(|((_, cls), _)| *cls == s)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Utility classes present in the view, ascending.
    pub fn utility_classes(&self) -> Vec<u8> {
        let mut classes: Vec<u8> = self.cells.keys().map(|&(y, _)| y).collect();
        classes.dedup();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Number of indices in the viewed set.
    pub fn viewed_len(&self) -> usize {
        self.viewed
    }

    /// (y, s, count) for every non-empty cell, in key order.
    pub fn cell_counts(&self) -> Vec<(u8, usize, usize)> {
        self.cells
            .iter()
            .map(|(&(y, s), v)| (y, s, v.len()))
            .collect()
    }
}
