//! Per-cell aggregation of run results and the summary.csv format.
//!
//! Metric columns are on the x100 percentage scale. `mean`/`std` pairs
//! aggregate over seeds (population standard deviation). The `selected`
//! column marks the winner by mean validation score, ties broken by
//! lexicographically smallest cell id.

use fairlens::trainer::RunResult;
use fairlens::{Error, Result};
use std::path::Path;

/// Aggregated metrics of one grid cell (x100 scale).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub status: String,
    pub seeds: usize,
    pub val_score_mean: f64,
    pub val_score_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub delta_sp_mean: f64,
    pub delta_sp_std: f64,
    pub delta_eo_mean: f64,
    pub delta_eo_std: f64,
    pub delta_ref_mean: f64,
    pub delta_ref_std: f64,
    pub delta_vef_mean: f64,
    pub delta_vef_std: f64,
    pub score_mean: f64,
    pub score_std: f64,
    /// Mean of (AUC + F1 + Acc) / 3 over seeds.
    pub utility_mean: f64,
    /// Mean of (delta_SP + delta_EO) / 2 over seeds.
    pub fairness_gap_mean: f64,
    /// Mean of (delta_REF + delta_VEF) / 2 over seeds.
    pub explanation_gap_mean: f64,
    pub selected: bool,
    pub error: String,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate one cell's per-seed results (already on the raw scale;
/// scaled x100 here).
pub fn summarize_cell(cell: &str, runs: &[&RunResult]) -> SummaryRow {
    let pull = |f: &dyn Fn(&RunResult) -> f64| -> Vec<f64> {
        runs.iter().map(|r| f(r) * 100.0).collect()
    };
    let (val_mean, val_std) = mean_std(&pull(&|r| r.best_val_score));
    let (auc_mean, auc_std) = mean_std(&pull(&|r| r.test_report.auc));
    let (f1_mean, f1_std) = mean_std(&pull(&|r| r.test_report.f1));
    let (acc_mean, acc_std) = mean_std(&pull(&|r| r.test_report.acc));
    let (sp_mean, sp_std) = mean_std(&pull(&|r| r.test_report.delta_sp));
    let (eo_mean, eo_std) = mean_std(&pull(&|r| r.test_report.delta_eo));
    let (ref_mean, ref_std) = mean_std(&pull(&|r| r.test_report.delta_ref));
    let (vef_mean, vef_std) = mean_std(&pull(&|r| r.test_report.delta_vef));
    let (score_mean, score_std) = mean_std(&pull(&|r| r.test_report.score));
    let (utility_mean, _) = mean_std(&pull(&|r| {
        (r.test_report.auc + r.test_report.f1 + r.test_report.acc) / 3.0
    }));
    let (fair_mean, _) = mean_std(&pull(&|r| {
        (r.test_report.delta_sp + r.test_report.delta_eo) / 2.0
    }));
    let (exp_mean, _) = mean_std(&pull(&|r| {
        (r.test_report.delta_ref + r.test_report.delta_vef) / 2.0
    }));
    SummaryRow {
        cell: cell.to_string(),
        status: "ok".into(),
        seeds: runs.len(),
        val_score_mean: val_mean,
        val_score_std: val_std,
        auc_mean,
        auc_std,
        f1_mean,
        f1_std,
        acc_mean,
        acc_std,
        delta_sp_mean: sp_mean,
        delta_sp_std: sp_std,
        delta_eo_mean: eo_mean,
        delta_eo_std: eo_std,
        delta_ref_mean: ref_mean,
        delta_ref_std: ref_std,
        delta_vef_mean: vef_mean,
        delta_vef_std: vef_std,
        score_mean,
        score_std,
        utility_mean,
        fairness_gap_mean: fair_mean,
        explanation_gap_mean: exp_mean,
        selected: false,
        error: String::new(),
    }
}

/// Row recording a failed cell.
pub fn failed_cell(cell: &str, message: &str) -> SummaryRow {
    SummaryRow {
        cell: cell.to_string(),
        status: "failed".into(),
        seeds: 0,
        val_score_mean: f64::NAN,
        val_score_std: f64::NAN,
        auc_mean: f64::NAN,
        auc_std: f64::NAN,
        f1_mean: f64::NAN,
        f1_std: f64::NAN,
        acc_mean: f64::NAN,
        acc_std: f64::NAN,
        delta_sp_mean: f64::NAN,
        delta_sp_std: f64::NAN,
        delta_eo_mean: f64::NAN,
        delta_eo_std: f64::NAN,
        delta_ref_mean: f64::NAN,
        delta_ref_std: f64::NAN,
        delta_vef_mean: f64::NAN,
        delta_vef_std: f64::NAN,
        score_mean: f64::NAN,
        score_std: f64::NAN,
        utility_mean: f64::NAN,
        fairness_gap_mean: f64::NAN,
        explanation_gap_mean: f64::NAN,
        selected: false,
        error: message.to_string(),
    }
}

/// Mark the winner by mean validation score (rows sorted by cell id;
/// ties fall to the lexicographically first id).
pub fn mark_winner(rows: &mut [SummaryRow]) {
    rows.sort_by(|a, b| a.cell.cmp(&b.cell));
    let winner = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == "ok")
        .max_by(|(ia, a), (ib, b)| {
            a.val_score_mean
                .partial_cmp(&b.val_score_mean)
                .unwrap()
                // Reversed index order: on ties, the smaller id wins.
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i);
    if let Some(i) = winner {
        rows[i].selected = true;
    }
}

const HEADER: &[&str] = &[
    "cell",
    "status",
    "seeds",
    "val_score_mean",
    "val_score_std",
    "auc_mean",
    "auc_std",
    "f1_mean",
    "f1_std",
    "acc_mean",
    "acc_std",
    "delta_sp_mean",
    "delta_sp_std",
    "delta_eo_mean",
    "delta_eo_std",
    "delta_ref_mean",
    "delta_ref_std",
    "delta_vef_mean",
    "delta_vef_std",
    "score_mean",
    "score_std",
    "utility_mean",
    "fairness_gap_mean",
    "explanation_gap_mean",
    "selected",
    "error",
];

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn parse_opt(field: &str) -> f64 {
    if field.is_empty() {
        f64::NAN
    } else {
        field.parse().unwrap_or(f64::NAN)
    }
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.cell.clone(),
            r.status.clone(),
            r.seeds.to_string(),
            fmt(r.val_score_mean),
            fmt(r.val_score_std),
            fmt(r.auc_mean),
            fmt(r.auc_std),
            fmt(r.f1_mean),
            fmt(r.f1_std),
            fmt(r.acc_mean),
            fmt(r.acc_std),
            fmt(r.delta_sp_mean),
            fmt(r.delta_sp_std),
            fmt(r.delta_eo_mean),
            fmt(r.delta_eo_std),
            fmt(r.delta_ref_mean),
            fmt(r.delta_ref_std),
            fmt(r.delta_vef_mean),
            fmt(r.delta_vef_std),
            fmt(r.score_mean),
            fmt(r.score_std),
            fmt(r.utility_mean),
            fmt(r.fairness_gap_mean),
            fmt(r.explanation_gap_mean),
            r.selected.to_string(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "unexpected summary header in {}",
            path.as_ref().display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(SummaryRow {
            cell: r[0].to_string(),
            status: r[1].to_string(),
            seeds: r[2].parse().unwrap_or(0),
            val_score_mean: parse_opt(&r[3]),
            val_score_std: parse_opt(&r[4]),
            auc_mean: parse_opt(&r[5]),
            auc_std: parse_opt(&r[6]),
            f1_mean: parse_opt(&r[7]),
            f1_std: parse_opt(&r[8]),
            acc_mean: parse_opt(&r[9]),
            acc_std: parse_opt(&r[10]),
            delta_sp_mean: parse_opt(&r[11]),
            delta_sp_std: parse_opt(&r[12]),
            delta_eo_mean: parse_opt(&r[13]),
            delta_eo_std: parse_opt(&r[14]),
            delta_ref_mean: parse_opt(&r[15]),
            delta_ref_std: parse_opt(&r[16]),
            delta_vef_mean: parse_opt(&r[17]),
            delta_vef_std: parse_opt(&r[18]),
            score_mean: parse_opt(&r[19]),
            score_std: parse_opt(&r[20]),
            utility_mean: parse_opt(&r[21]),
            fairness_gap_mean: parse_opt(&r[22]),
            explanation_gap_mean: parse_opt(&r[23]),
            selected: &r[24] == "true",
            error: r[25].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cell: &str, val: f64) -> SummaryRow {
        let mut r = failed_cell(cell, "");
        r.status = "ok".into();
        r.seeds = 1;
        r.val_score_mean = val;
        r
    }

    #[test]
    fn winner_ties_break_lexicographically() {
        let mut rows = vec![row("b", 1.0), row("a", 1.0), row("c", 0.5)];
        mark_winner(&mut rows);
        let selected: Vec<&str> = rows
            .iter()
            .filter(|r| r.selected)
            .map(|r| r.cell.as_str())
            .collect();
        assert_eq!(selected, vec!["a"]);
    }

    #[test]
    fn failed_rows_never_win() {
        let mut rows = vec![failed_cell("a", "boom"), row("b", -5.0)];
        mark_winner(&mut rows);
        assert!(!rows[0].selected);
        assert!(rows[1].selected);
    }

    #[test]
    fn summary_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let mut rows = vec![row("lr0.01_wd0_do0_lam1_sw", 42.25), failed_cell("bad", "x")];
        mark_winner(&mut rows);
        write_summary(&path, &rows).unwrap();
        let back = read_summary(&path).unwrap();
        assert_eq!(back.len(), 2);
        // Sorted by cell id: the failed "bad" row first.
        assert_eq!(back[0].cell, "bad");
        assert_eq!(back[0].status, "failed");
        assert!(back[0].val_score_mean.is_nan());
        assert_eq!(back[0].error, "x");
        assert_eq!(back[1].val_score_mean, 42.25);
        assert!(back[1].selected);
    }
}
