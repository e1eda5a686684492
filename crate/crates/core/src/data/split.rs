//! Stratified train/validation/test splitting.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Disjoint index sets covering a dataset exactly once.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn part(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Split stratified jointly on (utility label, sensitive class).
///
/// Every (y, s) cell is spread across all three parts, so each part keeps
/// at least one member of every cell; cells with fewer than three members
/// cannot satisfy that and raise a stratification error. Deterministic for
/// a given seed; each part comes back sorted.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), rng: &mut Rng) -> Result<Split> {
    let (f_train, f_val, f_test) = fractions;
    if f_train <= 0.0 || f_val <= 0.0 || f_test <= 0.0 {
        return Err(Error::Domain(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    if ((f_train + f_val + f_test) - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }

    let mut cells: BTreeMap<(u8, usize), Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        cells.entry((ds.y[i], ds.s[i])).or_default().push(i);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (&(y, s), members) in &mut cells {
        let n = members.len();
        if n < 3 {
            return Err(Error::Stratification(format!(
                "cell (y={y}, s={s}) has {n} member(s); need at least 3 to cover train/val/test"
            )));
        }
        rng.shuffle(members);
        let mut n_train = (f_train * n as f64).floor() as usize;
        let mut n_val = (f_val * n as f64).floor() as usize;
        // Every part gets at least one member of this cell.
        n_train = n_train.clamp(1, n - 2);
        n_val = n_val.clamp(1, n - n_train - 1);
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}
