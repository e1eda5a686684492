//! Pareto-frontier extraction over (utility up, traditional gap down,
//! explanation gap down).

use crate::summary::SummaryRow;
use fairlens::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One configuration's position in the three-objective trade-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub cell: String,
    pub utility: f64,
    pub fairness_gap: f64,
    pub explanation_gap: f64,
    pub dominated: bool,
}

/// `a` dominates `b` when it is at least as good on all three axes and
/// strictly better on at least one.
fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    let geq = a.utility >= b.utility
        && a.fairness_gap <= b.fairness_gap
        && a.explanation_gap <= b.explanation_gap;
    let strict = a.utility > b.utility
        || a.fairness_gap < b.fairness_gap
        || a.explanation_gap < b.explanation_gap;
    geq && strict
}

/// Flag dominated points. Duplicate coordinates never dominate each other.
pub fn mark_dominated(points: &mut [ParetoPoint]) {
    for i in 0..points.len() {
        points[i].dominated = (0..points.len())
            .any(|j| j != i && dominates(&points[j], &points[i]));
    }
}

/// Build Pareto points from the `ok` rows of a summary.
pub fn from_summary(rows: &[SummaryRow]) -> Result<Vec<ParetoPoint>> {
    let mut points: Vec<ParetoPoint> = rows
        .iter()
        .filter(|r| r.status == "ok")
        .map(|r| ParetoPoint {
            cell: r.cell.clone(),
            utility: r.utility_mean,
            fairness_gap: r.fairness_gap_mean,
            explanation_gap: r.explanation_gap_mean,
            dominated: false,
        })
        .collect();
    if points.is_empty() {
        return Err(Error::Config("summary has no successful rows".into()));
    }
    points.sort_by(|a, b| a.cell.cmp(&b.cell));
    mark_dominated(&mut points);
    Ok(points)
}

pub fn write_csv(path: impl AsRef<Path>, points: &[ParetoPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["cell", "utility", "fairness_gap", "explanation_gap", "dominated"])?;
    for p in points {
        w.write_record([
            p.cell.clone(),
            format!("{}", p.utility),
            format!("{}", p.fairness_gap),
            format!("{}", p.explanation_gap),
            p.dominated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ParetoPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let mut points = Vec::new();
    for record in reader.records() {
        let r = record?;
        points.push(ParetoPoint {
            cell: r[0].to_string(),
            utility: r[1].parse().map_err(|e| Error::Config(format!("{e}")))?,
            fairness_gap: r[2].parse().map_err(|e| Error::Config(format!("{e}")))?,
            explanation_gap: r[3].parse().map_err(|e| Error::Config(format!("{e}")))?,
            dominated: &r[4] == "true",
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(cell: &str, u: f64, f: f64, e: f64) -> ParetoPoint {
        ParetoPoint {
            cell: cell.into(),
            utility: u,
            fairness_gap: f,
            explanation_gap: e,
            dominated: false,
        }
    }

    #[test]
    fn single_point_is_non_dominated() {
        let mut pts = vec![point("a", 90.0, 5.0, 5.0)];
        mark_dominated(&mut pts);
        assert!(!pts[0].dominated);
    }

    #[test]
    fn strictly_worse_point_is_dominated() {
        let mut pts = vec![point("a", 90.0, 5.0, 5.0), point("b", 80.0, 6.0, 6.0)];
        mark_dominated(&mut pts);
        assert!(!pts[0].dominated);
        assert!(pts[1].dominated);
    }

    #[test]
    fn duplicates_are_both_non_dominated() {
        let mut pts = vec![point("a", 90.0, 5.0, 5.0), point("b", 90.0, 5.0, 5.0)];
        mark_dominated(&mut pts);
        assert!(!pts[0].dominated);
        assert!(!pts[1].dominated);
    }

    #[test]
    fn trade_off_points_are_all_kept() {
        // Better utility but worse gap in each direction: no domination.
        let mut pts = vec![point("a", 90.0, 6.0, 5.0), point("b", 85.0, 3.0, 7.0)];
        mark_dominated(&mut pts);
        assert!(!pts[0].dominated && !pts[1].dominated);
    }

    #[test]
    fn removing_a_dominated_point_preserves_the_frontier() {
        let mut pts = vec![
            point("a", 90.0, 5.0, 5.0),
            point("b", 80.0, 6.0, 6.0),
            point("c", 85.0, 4.0, 9.0),
        ];
        mark_dominated(&mut pts);
        let frontier: Vec<String> = pts
            .iter()
            .filter(|p| !p.dominated)
            .map(|p| p.cell.clone())
            .collect();
        let mut without: Vec<ParetoPoint> = pts
            .iter()
            .filter(|p| !p.dominated)
            .cloned()
            .collect();
        mark_dominated(&mut without);
        let frontier_after: Vec<String> = without
            .iter()
            .filter(|p| !p.dominated)
            .map(|p| p.cell.clone())
            .collect();
        assert_eq!(frontier, frontier_after);
    }
}
