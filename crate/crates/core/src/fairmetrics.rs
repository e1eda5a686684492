//! Evaluation metrics: utility (AUC/F1/accuracy), result-oriented fairness
//! gaps, explanation fairness (ratio-based and value-based), and the
//! combined model-selection score.
//!
//! The two explanation-fairness metrics read differently on purpose.
//! The ratio-based gap asks how evenly the *globally* best-explained
//! instances are spread across groups; the value-based gap compares the
//! average explanation quality of each group's *own* top-K instances, so
//! it still sees a quality difference when both groups are equally
//! represented in the global top set. All gaps are reported on the raw
//! [0, 1] scale; multiply by 100 for percentage reporting.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Explanation-quality scores with their global top-K labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct EqScores {
    pub eq: Vec<f64>,
    /// K as a percentage in (0, 100].
    pub k_percent: f64,
    /// 1 for instances in the global top-K set.
    pub q_hat: Vec<u8>,
    /// Members of the global top-K set, ascending.
    pub top_k_set: Vec<usize>,
}

/// Rank indices by (EQ descending, index ascending).
fn rank_desc(eq: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eq.len()).collect();
    order.sort_by(|&i, &j| eq[j].partial_cmp(&eq[i]).unwrap().then(i.cmp(&j)));
    order
}

fn top_count(n: usize, k_percent: f64) -> usize {
    (k_percent / 100.0 * n as f64).ceil() as usize
}

/// Label the top K percent of instances (by EQ, ties toward lower index)
/// as high-quality.
pub fn label_top_k(eq: &[f64], k_percent: f64) -> Result<EqScores> {
    if eq.is_empty() {
        return Err(Error::Domain("empty EQ sequence".into()));
    }
    if !(0.0 < k_percent && k_percent <= 100.0) {
        return Err(Error::Domain(format!(
            "K must be in (0, 100], got {k_percent}"
        )));
    }
    if eq.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("EQ values must be finite".into()));
    }
    let count = top_count(eq.len(), k_percent);
    let mut top_k_set: Vec<usize> = rank_desc(eq).into_iter().take(count).collect();
    top_k_set.sort_unstable();
    let mut q_hat = vec![0u8; eq.len()];
    for &i in &top_k_set {
        q_hat[i] = 1;
    }
    Ok(EqScores {
        eq: eq.to_vec(),
        k_percent,
        q_hat,
        top_k_set,
    })
}

fn class_count(s: &[usize]) -> Result<usize> {
    if s.is_empty() {
        return Err(Error::Domain("empty sensitive sequence".into()));
    }
    let c = s.iter().max().unwrap() + 1;
    if c < 2 {
        return Err(Error::Domain("need at least two sensitive classes".into()));
    }
    for cls in 0..c {
        if !s.contains(&cls) {
            return Err(Error::Domain(format!("sensitive class {cls} is empty")));
        }
    }
    Ok(c)
}

/// Positive-prediction rate per sensitive class.
pub fn positive_rates(y_hat: &[u8], s: &[usize]) -> Result<Vec<f64>> {
    if y_hat.len() != s.len() {
        return Err(Error::Domain("prediction/sensitive length mismatch".into()));
    }
    let c = class_count(s)?;
    let mut pos = vec![0usize; c];
    let mut tot = vec![0usize; c];
    for (&p, &cls) in y_hat.iter().zip(s) {
        tot[cls] += 1;
        pos[cls] += p as usize;
    }
    Ok((0..c).map(|cls| pos[cls] as f64 / tot[cls] as f64).collect())
}

/// Statistical parity gap: the largest pairwise difference in
/// positive-prediction rates (the plain binary gap when there are two
/// classes).
pub fn delta_sp(y_hat: &[u8], s: &[usize]) -> Result<f64> {
    let rates = positive_rates(y_hat, s)?;
    multi_class_gap(&rates, MultiClassMode::MaxPairwise)
}

/// True-positive rate per sensitive class. Errors when a class has no
/// positive instances.
pub fn true_positive_rates(y_hat: &[u8], y: &[u8], s: &[usize]) -> Result<Vec<f64>> {
    if y_hat.len() != y.len() || y.len() != s.len() {
        return Err(Error::Domain("length mismatch".into()));
    }
    let c = class_count(s)?;
    let mut hit = vec![0usize; c];
    let mut pos = vec![0usize; c];
    for i in 0..y.len() {
        if y[i] == 1 {
            pos[s[i]] += 1;
            hit[s[i]] += y_hat[i] as usize;
        }
    }
    (0..c)
        .map(|cls| {
            if pos[cls] == 0 {
                Err(Error::Domain(format!(
                    "sensitive class {cls} has no positive instances"
                )))
            } else {
                Ok(hit[cls] as f64 / pos[cls] as f64)
            }
        })
        .collect()
}

/// Equal opportunity gap: the largest pairwise true-positive-rate
/// difference.
pub fn delta_eo(y_hat: &[u8], y: &[u8], s: &[usize]) -> Result<f64> {
    let rates = true_positive_rates(y_hat, y, s)?;
    multi_class_gap(&rates, MultiClassMode::MaxPairwise)
}

/// Per-class proportion of instances carrying the global top-K label.
pub fn top_k_rates(eqs: &EqScores, s: &[usize]) -> Result<Vec<f64>> {
    if eqs.q_hat.len() != s.len() {
        return Err(Error::Domain("EQ/sensitive length mismatch".into()));
    }
    positive_rates(&eqs.q_hat, s)
}

/// Ratio-based explanation fairness: the gap between subgroup proportions
/// of globally top-K-labeled instances.
pub fn delta_ref(eqs: &EqScores, s: &[usize]) -> Result<f64> {
    let rates = top_k_rates(eqs, s)?;
    multi_class_gap(&rates, MultiClassMode::MaxPairwise)
}

/// Mean EQ over each subgroup's own top-K instances (K percent of the
/// subgroup size, ties toward lower index).
pub fn subgroup_top_k_means(eq: &[f64], s: &[usize], k_percent: f64) -> Result<Vec<f64>> {
    if eq.len() != s.len() {
        return Err(Error::Domain("EQ/sensitive length mismatch".into()));
    }
    if eq.is_empty() {
        return Err(Error::Domain("empty EQ sequence".into()));
    }
    if !(0.0 < k_percent && k_percent <= 100.0) {
        return Err(Error::Domain(format!(
            "K must be in (0, 100], got {k_percent}"
        )));
    }
    let c = class_count(s)?;
    (0..c)
        .map(|cls| {
            let members: Vec<usize> = (0..s.len()).filter(|&i| s[i] == cls).collect();
            let values: Vec<f64> = members.iter().map(|&i| eq[i]).collect();
            let count = top_count(values.len(), k_percent);
            let chosen = rank_desc(&values);
            // Sum in ascending index order so the arithmetic is
            // reproducible independent of ranking order.
            let mut picked: Vec<usize> = chosen.into_iter().take(count).collect();
            picked.sort_unstable();
            let sum: f64 = picked.iter().map(|&local| values[local]).sum();
            Ok(sum / count as f64)
        })
        .collect()
}

/// Value-based explanation fairness: the gap between subgroup means of
/// their own top-K EQ values.
pub fn delta_vef(eq: &[f64], s: &[usize], k_percent: f64) -> Result<f64> {
    let means = subgroup_top_k_means(eq, s, k_percent)?;
    multi_class_gap(&means, MultiClassMode::MaxPairwise)
}

/// Alternate value-based reading: mean EQ of each subgroup's members of
/// the *global* top-K set. Errors when a subgroup has no such members.
pub fn delta_vef_global(eqs: &EqScores, s: &[usize]) -> Result<f64> {
    if eqs.q_hat.len() != s.len() {
        return Err(Error::Domain("EQ/sensitive length mismatch".into()));
    }
    let c = class_count(s)?;
    let mut means = Vec::with_capacity(c);
    for cls in 0..c {
        let members: Vec<usize> = eqs
            .top_k_set
            .iter()
            .copied()
            .filter(|&i| s[i] == cls)
            .collect();
        if members.is_empty() {
            return Err(Error::Domain(format!(
                "sensitive class {cls} has no instances in the global top-K set"
            )));
        }
        let sum: f64 = members.iter().map(|&i| eqs.eq[i]).sum();
        means.push(sum / members.len() as f64);
    }
    multi_class_gap(&means, MultiClassMode::MaxPairwise)
}

/// How to reduce per-class metric values to one gap when there are more
/// than two sensitive classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiClassMode {
    /// Population variance of the per-class values.
    Variance,
    /// Largest absolute pairwise difference (the binary gap when C = 2).
    MaxPairwise,
}

/// Reduce per-class values to a scalar unfairness measure.
pub fn multi_class_gap(values: &[f64], mode: MultiClassMode) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least two per-class values, got {}",
            values.len()
        )));
    }
    match mode {
        MultiClassMode::Variance => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64)
        }
        MultiClassMode::MaxPairwise => {
            let mut worst = 0.0f64;
            for i in 0..values.len() {
                for j in (i + 1)..values.len() {
                    worst = worst.max((values[i] - values[j]).abs());
                }
            }
            Ok(worst)
        }
    }
}

/// Utility metrics at threshold 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityMetrics {
    pub auc: f64,
    pub f1: f64,
    pub acc: f64,
}

/// Area under the ROC curve by pairwise concordance with half credit for
/// ties. Errors unless both label classes are present.
pub fn auc(y_prob: &[f64], y: &[u8]) -> Result<f64> {
    if y_prob.len() != y.len() {
        return Err(Error::Domain("probability/label length mismatch".into()));
    }
    let pos: Vec<f64> = y_prob
        .iter()
        .zip(y)
        .filter(|(_, &t)| t == 1)
        .map(|(&p, _)| p)
        .collect();
    let neg: Vec<f64> = y_prob
        .iter()
        .zip(y)
        .filter(|(_, &t)| t == 0)
        .map(|(&p, _)| p)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Domain(
            "AUC needs both label classes present".into(),
        ));
    }
    let mut credit = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                credit += 1.0;
            } else if p == q {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (pos.len() as f64 * neg.len() as f64))
}

/// F1 score of the positive class (zero-denominator conventions: 0).
pub fn f1_score(y_hat: &[u8], y: &[u8]) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&p, &t) in y_hat.iter().zip(y) {
        match (p, t) {
            (1, 1) => tp += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

pub fn accuracy(y_hat: &[u8], y: &[u8]) -> f64 {
    let hits = y_hat.iter().zip(y).filter(|(p, t)| p == t).count();
    hits as f64 / y.len() as f64
}

/// AUC, F1, and accuracy together (predictions thresholded at 0.5).
pub fn utility_metrics(y_prob: &[f64], y: &[u8]) -> Result<UtilityMetrics> {
    let auc = auc(y_prob, y)?;
    let y_hat: Vec<u8> = y_prob.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(UtilityMetrics {
        auc,
        f1: f1_score(&y_hat, y),
        acc: accuracy(&y_hat, y),
    })
}

/// The combined score: mean utility minus mean traditional gap minus mean
/// explanation gap. Scale-agnostic (feed raw fractions or percentages
/// consistently).
pub fn overall_score(
    auc: f64,
    f1: f64,
    acc: f64,
    d_sp: f64,
    d_eo: f64,
    d_ref: f64,
    d_vef: f64,
) -> f64 {
    (auc + f1 + acc) / 3.0 - (d_sp + d_eo) / 2.0 - (d_ref + d_vef) / 2.0
}

/// Which value-based explanation fairness reading a report used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VefVariant {
    /// Each subgroup's own top-K instances (the default reading).
    PerSubgroupTopK,
    /// The global top-K set split by subgroup.
    GlobalTopKSplit,
}

/// Instance count of one (utility class, sensitive class) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupCount {
    pub y: u8,
    pub s: usize,
    pub count: usize,
}

/// Variance-mode gap values reported alongside the max-pairwise defaults
/// when the sensitive feature has more than two classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiClassGaps {
    pub sp_variance: f64,
    pub eo_variance: f64,
    pub ref_variance: f64,
    pub vef_variance: f64,
}

/// The full evaluation battery for one model on one data part. All values
/// are on the raw scale; `score` is the raw-scale combined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub auc: f64,
    pub f1: f64,
    pub acc: f64,
    pub delta_sp: f64,
    pub delta_eo: f64,
    pub delta_ref: f64,
    pub delta_vef: f64,
    pub score: f64,
    pub k_percent: f64,
    pub vef_variant: VefVariant,
    pub subgroup_counts: Vec<SubgroupCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multi_class: Option<MultiClassGaps>,
}

impl FairnessReport {
    /// Assemble a report from predictions and explanation-quality values.
    pub fn compute(
        y_prob: &[f64],
        y: &[u8],
        s: &[usize],
        eq: &[f64],
        k_percent: f64,
        vef_variant: VefVariant,
    ) -> Result<FairnessReport> {
        let utility = utility_metrics(y_prob, y)?;
        let y_hat: Vec<u8> = y_prob.iter().map(|&p| u8::from(p >= 0.5)).collect();
        let d_sp = delta_sp(&y_hat, s)?;
        let d_eo = delta_eo(&y_hat, y, s)?;
        let eqs = label_top_k(eq, k_percent)?;
        let d_ref = delta_ref(&eqs, s)?;
        let d_vef = match vef_variant {
            VefVariant::PerSubgroupTopK => delta_vef(eq, s, k_percent)?,
            VefVariant::GlobalTopKSplit => delta_vef_global(&eqs, s)?,
        };
        let score = overall_score(
            utility.auc,
            utility.f1,
            utility.acc,
            d_sp,
            d_eo,
            d_ref,
            d_vef,
        );

        let c = class_count(s)?;
        let mut subgroup_counts = Vec::new();
        for target_y in [0u8, 1u8] {
            for target_s in 0..c {
                let count = y
                    .iter()
                    .zip(s)
                    .filter(|(&yy, &ss)| yy == target_y && ss == target_s)
                    .count();
                subgroup_counts.push(SubgroupCount {
                    y: target_y,
                    s: target_s,
                    count,
                });
            }
        }

        let multi_class = if c > 2 {
            Some(MultiClassGaps {
                sp_variance: multi_class_gap(&positive_rates(&y_hat, s)?, MultiClassMode::Variance)?,
                eo_variance: multi_class_gap(
                    &true_positive_rates(&y_hat, y, s)?,
                    MultiClassMode::Variance,
                )?,
                ref_variance: multi_class_gap(&top_k_rates(&eqs, s)?, MultiClassMode::Variance)?,
                vef_variance: multi_class_gap(
                    &subgroup_top_k_means(eq, s, k_percent)?,
                    MultiClassMode::Variance,
                )?,
            })
        } else {
            None
        };

        Ok(FairnessReport {
            auc: utility.auc,
            f1: utility.f1,
            acc: utility.acc,
            delta_sp: d_sp,
            delta_eo: d_eo,
            delta_ref: d_ref,
            delta_vef: d_vef,
            score,
            k_percent,
            vef_variant,
            subgroup_counts,
            multi_class,
        })
    }
}
