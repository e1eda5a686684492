//! Local explainers, top-k feature masks, and fidelity.
//!
//! Two explainers are provided. Gradient saliency is cheap enough to run
//! every training epoch: importance is `|x * d y_prob / d x|` elementwise.
//! The HSIC-Lasso surrogate is the evaluation explainer: it fits a
//! nonnegative Lasso over per-feature Gaussian kernel similarities on a
//! neighborhood of Euclidean-nearest instances, so the selected features
//! are the ones whose similarity structure best reproduces the model's
//! output similarity structure around the instance.

use crate::error::{Error, Result};
use crate::model::MlpModel;
use crate::numerics::Matrix;
use serde::{Deserialize, Serialize};

/// Per-instance, per-feature nonnegative importance scores.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub importance: Matrix,
    pub explainer_id: String,
}

/// Binary feature mask: zeros sit on each row's top-k importance positions.
#[derive(Debug, Clone)]
pub struct Mask {
    pub m: Matrix,
    pub k: usize,
}

impl Mask {
    /// The all-ones mask (no features removed).
    pub fn identity(rows: usize, cols: usize) -> Mask {
        Mask {
            m: Matrix::filled(rows, cols, 1.0),
            k: 0,
        }
    }

    /// The masked inputs `x ⊙ m`.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        x.hadamard(&self.m)
    }
}

/// Which fidelity definition to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityVariant {
    /// Drop in the predicted probability of the true class.
    Probability,
    /// Drop in 0/1 correctness at threshold 0.5.
    Accuracy,
}

/// Per-instance fidelity values.
#[derive(Debug, Clone)]
pub struct FidelityRecord {
    pub values: Vec<f64>,
    pub variant: FidelityVariant,
}

/// Explainer selection, serializable for configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplainerChoice {
    GradientSaliency,
    HsicLasso {
        n_neighbors: usize,
        lasso_penalty: f64,
    },
}

impl ExplainerChoice {
    pub fn hsic_default() -> Self {
        ExplainerChoice::HsicLasso {
            n_neighbors: 50,
            lasso_penalty: 1e-3,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ExplainerChoice::GradientSaliency => "gradient_saliency",
            ExplainerChoice::HsicLasso { .. } => "hsic_lasso",
        }
    }
}

/// Explain every row of `x` with the chosen explainer.
pub fn explain(model: &MlpModel, x: &Matrix, choice: &ExplainerChoice) -> Result<Explanation> {
    match choice {
        ExplainerChoice::GradientSaliency => explain_gradient(model, x),
        ExplainerChoice::HsicLasso {
            n_neighbors,
            lasso_penalty,
        } => {
            let mut importance = Matrix::zeros(x.rows(), x.cols());
            for i in 0..x.rows() {
                let coefs = explain_hsic_lasso(model, x, i, *n_neighbors, *lasso_penalty)?;
                importance.row_mut(i).copy_from_slice(&coefs);
            }
            Ok(Explanation {
                importance,
                explainer_id: choice.id().to_string(),
            })
        }
    }
}

/// Gradient saliency: `|x_ij * d y_prob_i / d x_ij|`.
pub fn explain_gradient(model: &MlpModel, x: &Matrix) -> Result<Explanation> {
    let grad = model.input_gradient(x)?;
    let importance = x.hadamard(&grad)?.map(f64::abs);
    Ok(Explanation {
        importance,
        explainer_id: "gradient_saliency".to_string(),
    })
}

/// HSIC-Lasso importance for one instance of `x`.
///
/// The neighborhood is the `n_neighbors` Euclidean-nearest rows of `x`
/// (including the instance itself; `n_neighbors` of at least the feature
/// count is recommended so the Lasso system is not trivially
/// underdetermined). Each feature's 1-D Gaussian kernel over the
/// neighborhood (median-heuristic bandwidth) is double-centered and
/// Frobenius-normalized; the target kernel is built the same way from the
/// model's predicted probabilities. A nonnegative Lasso fit by cyclic
/// coordinate descent (tolerance 1e-6, at most 10^4 sweeps) gives the
/// importance vector. Features with a degenerate kernel (zero variance in
/// the neighborhood) get coefficient 0.
pub fn explain_hsic_lasso(
    model: &MlpModel,
    x: &Matrix,
    instance: usize,
    n_neighbors: usize,
    lasso_penalty: f64,
) -> Result<Vec<f64>> {
    if instance >= x.rows() {
        return Err(Error::Domain(format!(
            "instance {instance} out of range for {} rows",
            x.rows()
        )));
    }
    if n_neighbors < 2 {
        return Err(Error::Domain("need at least two neighbors".into()));
    }
    if lasso_penalty < 0.0 {
        return Err(Error::Domain("lasso penalty must be nonnegative".into()));
    }
    let d = x.cols();
    let n = n_neighbors.min(x.rows());

    // Euclidean-nearest rows, ties broken by index; self is at distance 0.
    let anchor = x.row(instance).to_vec();
    let mut by_distance: Vec<(f64, usize)> = (0..x.rows())
        .map(|r| {
            let dist: f64 = x
                .row(r)
                .iter()
                .zip(&anchor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (dist, r)
        })
        .collect();
    by_distance.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let neighborhood: Vec<usize> = by_distance.iter().take(n).map(|&(_, r)| r).collect();
    let pool = x.select_rows(&neighborhood);

    let y_prob = model.forward_eval(&pool, None)?.y_prob;
    let target = match centered_gaussian_kernel(&y_prob) {
        Some(t) => t,
        // Flat predictions around the instance: nothing to attribute.
        None => return Ok(vec![0.0; d]),
    };

    let kernels: Vec<Option<Vec<f64>>> = (0..d)
        .map(|j| {
            let values: Vec<f64> = (0..n).map(|r| pool.get(r, j)).collect();
            centered_gaussian_kernel(&values)
        })
        .collect();

    // Nonnegative Lasso on the vectorized kernels by cyclic coordinate
    // descent. Kernels are unit Frobenius norm, so each coordinate update
    // is a plain soft-threshold.
    let mut beta = vec![0.0; d];
    let mut residual = target;
    for _ in 0..10_000 {
        let mut max_change = 0.0f64;
        for (j, kernel) in kernels.iter().enumerate() {
            let Some(k) = kernel else { continue };
            let corr: f64 = k.iter().zip(&residual).map(|(a, b)| a * b).sum();
            let updated = (beta[j] + corr - lasso_penalty).max(0.0);
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, &kv) in residual.iter_mut().zip(k.iter()) {
                    *r -= delta * kv;
                }
                beta[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < 1e-6 {
            break;
        }
    }
    Ok(beta)
}

/// Double-centered, Frobenius-normalized Gaussian kernel matrix of a 1-D
/// value set, flattened row-major. `None` when the values (or the centered
/// kernel) are degenerate.
fn centered_gaussian_kernel(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len();
    // Median-heuristic bandwidth over pairwise absolute differences.
    let mut diffs: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push((values[i] - values[j]).abs());
        }
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let bandwidth = if diffs.is_empty() {
        0.0
    } else if diffs.len() % 2 == 1 {
        diffs[diffs.len() / 2]
    } else {
        0.5 * (diffs[diffs.len() / 2 - 1] + diffs[diffs.len() / 2])
    };
    if bandwidth < 1e-12 {
        return None;
    }

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let z = (values[i] - values[j]) / bandwidth;
            kernel[i * n + j] = (-0.5 * z * z).exp();
        }
    }
    // Double centering: K - row means - col means + grand mean.
    let mut row_mean = vec![0.0; n];
    for i in 0..n {
        row_mean[i] = kernel[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
    }
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // The kernel is symmetric, so column means equal row means.
            kernel[i * n + j] += grand - row_mean[i] - row_mean[j];
        }
    }
    let norm = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    for v in &mut kernel {
        *v /= norm;
    }
    Some(kernel)
}

/// Zero out each row's `k` most important features (ties broken toward the
/// lower feature index).
pub fn build_mask(exp: &Explanation, k: usize) -> Result<Mask> {
    let d = exp.importance.cols();
    if k == 0 || k >= d {
        return Err(Error::Domain(format!(
            "masked feature count k={k} must satisfy 1 <= k < d={d}"
        )));
    }
    let mut m = Matrix::filled(exp.importance.rows(), d, 1.0);
    for r in 0..exp.importance.rows() {
        let row = exp.importance.row(r);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| {
            row[j]
                .partial_cmp(&row[i])
                .unwrap()
                .then(i.cmp(&j))
        });
        for &top in order.iter().take(k) {
            m.set(r, top, 0.0);
        }
    }
    Ok(Mask { m, k })
}

/// Fidelity of the masked features: the drop in prediction quality after
/// removing each instance's masked features.
pub fn fidelity(
    model: &MlpModel,
    x: &Matrix,
    mask: &Mask,
    y: &[u8],
    variant: FidelityVariant,
) -> Result<FidelityRecord> {
    if mask.m.shape() != x.shape() {
        return Err(Error::Dimension {
            op: "fidelity",
            lhs_rows: x.rows(),
            lhs_cols: x.cols(),
            rhs_rows: mask.m.rows(),
            rhs_cols: mask.m.cols(),
        });
    }
    if y.len() != x.rows() {
        return Err(Error::Domain(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let x_masked = mask.apply(x)?;
    let p_raw = model.forward_eval(x, None)?.y_prob;
    let p_masked = model.forward_eval(&x_masked, None)?.y_prob;
    let values = p_raw
        .iter()
        .zip(&p_masked)
        .zip(y)
        .map(|((&p, &pm), &t)| match variant {
            FidelityVariant::Probability => {
                let true_p = if t == 1 { p } else { 1.0 - p };
                let true_pm = if t == 1 { pm } else { 1.0 - pm };
                true_p - true_pm
            }
            FidelityVariant::Accuracy => {
                let correct = f64::from(u8::from(p >= 0.5) == t);
                let correct_masked = f64::from(u8::from(pm >= 0.5) == t);
                correct - correct_masked
            }
        })
        .collect();
    Ok(FidelityRecord { values, variant })
}
