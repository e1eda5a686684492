//! CSV ingestion.
//!
//! Input files are comma-separated UTF-8 with a header row. Column kinds are
//! inferred from the first data row: a cell that parses as a number makes the
//! column numeric, anything else makes it categorical. Later rows that
//! contradict a numeric column are parse errors (rows are 1-based, header
//! excluded). Categorical columns are one-hot encoded in first-appearance
//! order with the first level dropped.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How to interpret the label and sensitive columns of a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CsvSchema {
    /// Header name of the utility-label column.
    pub label_column: String,
    /// Cell value treated as the positive label; everything else is 0.
    pub positive_label: String,
    /// Header name of the sensitive column.
    pub sensitive_column: String,
    /// Sensitive class mapping: position in this list is the class index.
    /// Every listed class must occur in the data, and every data value must
    /// be listed.
    pub sensitive_values: Vec<String>,
    /// Keep the sensitive class index as a feature column (default true;
    /// the sensitive attribute is ordinarily part of the feature set).
    #[serde(default = "default_true")]
    pub include_sensitive_feature: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, PartialEq)]
enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Sensitive,
}

/// Load a dataset according to `schema`. Feature values are raw; call
/// [`Dataset::normalize`] once a split is available.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    if schema.sensitive_values.len() < 2 {
        return Err(Error::Schema(
            "sensitive_values must list at least two classes".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = headers
        .iter()
        .position(|h| h == &schema.label_column)
        .ok_or_else(|| Error::Schema(format!("label column '{}' not found", schema.label_column)))?;
    let sensitive_idx = headers
        .iter()
        .position(|h| h == &schema.sensitive_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "sensitive column '{}' not found",
                schema.sensitive_column
            ))
        })?;
    if label_idx == sensitive_idx {
        return Err(Error::Schema(
            "label and sensitive columns must differ".into(),
        ));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }

    // Column kinds from the first data row.
    let kinds: Vec<ColumnKind> = headers
        .iter()
        .enumerate()
        .map(|(c, _)| {
            if c == label_idx {
                ColumnKind::Label
            } else if c == sensitive_idx {
                ColumnKind::Sensitive
            } else if rows[0][c].parse::<f64>().is_ok() {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        })
        .collect();

    // Levels per categorical column, in first-appearance order.
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for row in &rows {
        for (c, kind) in kinds.iter().enumerate() {
            if *kind == ColumnKind::Categorical && !levels[c].contains(&row[c]) {
                levels[c].push(row[c].clone());
            }
        }
    }

    // Feature layout.
    let mut feature_names: Vec<String> = Vec::new();
    for (c, kind) in kinds.iter().enumerate() {
        match kind {
            ColumnKind::Numeric => feature_names.push(headers[c].clone()),
            // Drop-first rule: L levels become L-1 indicator columns.
            ColumnKind::Categorical => {
                for level in levels[c].iter().skip(1) {
                    feature_names.push(format!("{}={}", headers[c], level));
                }
            }
            ColumnKind::Label => {}
            ColumnKind::Sensitive => {
                if schema.include_sensitive_feature {
                    feature_names.push(headers[c].clone());
                }
            }
        }
    }
    if feature_names.is_empty() {
        return Err(Error::Schema("no feature columns left after encoding".into()));
    }

    let n = rows.len();
    let d = feature_names.len();
    let mut data = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);

    for (r, row) in rows.iter().enumerate() {
        let mut col = 0usize;
        let mut sensitive_class: Option<usize> = None;
        for (c, kind) in kinds.iter().enumerate() {
            match kind {
                ColumnKind::Numeric => {
                    let v: f64 = row[c].parse().map_err(|_| Error::Parse {
                        row: r + 1,
                        column: headers[c].clone(),
                        message: format!("expected a number, got '{}'", row[c]),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row: r + 1,
                            column: headers[c].clone(),
                            message: "non-finite value".into(),
                        });
                    }
                    data[r * d + col] = v;
                    col += 1;
                }
                ColumnKind::Categorical => {
                    let hit = levels[c].iter().position(|l| l == &row[c]).expect(
                        "level collected in first pass",
                    );
                    for k in 1..levels[c].len() {
                        data[r * d + col] = if hit == k { 1.0 } else { 0.0 };
                        col += 1;
                    }
                }
                ColumnKind::Label => {
                    y.push(u8::from(row[c] == schema.positive_label));
                }
                ColumnKind::Sensitive => {
                    let cls = schema
                        .sensitive_values
                        .iter()
                        .position(|v| v == &row[c])
                        .ok_or_else(|| {
                            Error::Schema(format!(
                                "row {}: sensitive value '{}' is not in the schema mapping",
                                r + 1,
                                row[c]
                            ))
                        })?;
                    sensitive_class = Some(cls);
                    if schema.include_sensitive_feature {
                        data[r * d + col] = cls as f64;
                        col += 1;
                    }
                }
            }
        }
        s.push(sensitive_class.expect("sensitive column visited"));
    }

    let x = Matrix::from_vec(n, d, data)?;
    Dataset::new(
        x,
        y,
        s,
        feature_names,
        schema.sensitive_column.clone(),
        schema.sensitive_values.len(),
    )
}
