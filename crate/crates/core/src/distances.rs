//! Subgroup distance functions: sliced-Wasserstein, negative cosine,
//! Kullback-Leibler, and mean-square-error, plus class-conditioned
//! subgroup aggregation.
//!
//! All four operate on stacks of hidden representations (one row per
//! instance). The sliced-Wasserstein distance follows the Monte Carlo
//! scheme: draw `I` random unit vectors, project both stacks to 1-D,
//! sort, and accumulate the mean squared difference of the sorted
//! projections over the slices. Unequal stacks are padded by resampling
//! the smaller one with replacement.
//!
//! The other three reduce rowwise over a pair of equally sized sampled
//! stacks: cosine takes `-(1/N_s) * sum_i |a_i . b_i| / max(|A|^2, |B|^2, eps)`
//! (stack-level squared norms, written exactly as that formula reads;
//! see [`DistanceSpec::per_row_cosine`] for the per-row reading), KL
//! normalizes each row to a distribution after an `eps` shift and sums
//! `|sum_j p_ij log(p_ij / q_ij)|`, MSE is `(1/N_s)` times the Frobenius
//! norm of the rowwise difference stack.
//!
//! For training, sampling decisions (which rows, which slice vectors) are
//! materialized once per step into a [`DistanceDraw`] so that the loss and
//! its gradient see exactly the same realized function.

use crate::data::SubgroupView;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which distance function to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Sw,
    Cosine,
    Kl,
    Mse,
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            DistanceKind::Sw => "sw",
            DistanceKind::Cosine => "cosine",
            DistanceKind::Kl => "kl",
            DistanceKind::Mse => "mse",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sw" => Ok(DistanceKind::Sw),
            "cosine" => Ok(DistanceKind::Cosine),
            "kl" => Ok(DistanceKind::Kl),
            "mse" => Ok(DistanceKind::Mse),
            other => Err(Error::Config(format!(
                "unknown distance '{other}' (expected sw, cosine, kl, or mse)"
            ))),
        }
    }
}

/// Configuration of the subgroup distance term.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    /// Rows sampled per subgroup for cosine/KL/MSE. `None` resolves to the
    /// smallest subgroup size, capped at 256.
    pub n_samples: Option<usize>,
    /// Number of random projections for sliced-Wasserstein.
    pub slices: usize,
    /// Denominator guard for cosine and the KL stabilization shift.
    pub eps: f64,
    /// `true`: average the pairwise distance per utility class; `false`:
    /// one distance over whole subgroups.
    pub class_conditioned: bool,
    /// Use per-row norms in the cosine denominator instead of the
    /// stack-level squared norms the formula literally states.
    pub per_row_cosine: bool,
    /// Seed for the distance sampling stream.
    pub seed: u64,
}

impl Default for DistanceSpec {
    fn default() -> Self {
        DistanceSpec {
            kind: DistanceKind::Sw,
            n_samples: None,
            slices: 50,
            eps: 1e-8,
            class_conditioned: true,
            per_row_cosine: false,
            seed: 0,
        }
    }
}

impl DistanceSpec {
    fn validate(&self) -> Result<()> {
        if self.slices == 0 {
            return Err(Error::Config("slice count must be at least 1".into()));
        }
        if let Some(n) = self.n_samples {
            if n == 0 {
                return Err(Error::Config("n_samples must be at least 1".into()));
            }
        }
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

fn check_equal_shapes(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            lhs_rows: a.rows(),
            lhs_cols: a.cols(),
            rhs_rows: b.rows(),
            rhs_cols: b.cols(),
        });
    }
    Ok(())
}

/// Sample `count` uniformly random unit vectors in `dim` dimensions.
fn unit_slices(dim: usize, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

/// Indices sorted ascending by value, ties by index.
fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    idx
}

/// Sliced-Wasserstein between equally sized stacks, with optional gradient
/// accumulation into per-stack-row gradients. Sum over slices of the mean
/// squared sorted-projection difference.
fn sw_pair(
    a: &Matrix,
    b: &Matrix,
    slices: &[Vec<f64>],
    mut grads: Option<(&mut Matrix, &mut Matrix)>,
) -> f64 {
    let n = a.rows();
    debug_assert_eq!(n, b.rows());
    let mut total = 0.0;
    for v in slices {
        let pa: Vec<f64> = (0..n)
            .map(|r| a.row(r).iter().zip(v).map(|(x, w)| x * w).sum())
            .collect();
        let pb: Vec<f64> = (0..n)
            .map(|r| b.row(r).iter().zip(v).map(|(x, w)| x * w).sum())
            .collect();
        let oa = argsort(&pa);
        let ob = argsort(&pb);
        for k in 0..n {
            let diff = pa[oa[k]] - pb[ob[k]];
            total += diff * diff / n as f64;
            if let Some((ga, gb)) = grads.as_mut() {
                let coeff = 2.0 * diff / n as f64;
                for (j, w) in v.iter().enumerate() {
                    let cur = ga.get(oa[k], j);
                    ga.set(oa[k], j, cur + coeff * w);
                    let cur = gb.get(ob[k], j);
                    gb.set(ob[k], j, cur - coeff * w);
                }
            }
        }
    }
    total
}

/// Negative cosine similarity over a pair of sampled stacks.
fn cosine_pair(
    a: &Matrix,
    b: &Matrix,
    eps: f64,
    per_row: bool,
    mut grads: Option<(&mut Matrix, &mut Matrix)>,
) -> f64 {
    let n = a.rows() as f64;
    if per_row {
        let mut total = 0.0;
        for r in 0..a.rows() {
            let ra = a.row(r);
            let rb = b.row(r);
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            let na = ra.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = rb.iter().map(|x| x * x).sum::<f64>().sqrt();
            let denom = (na * nb).max(eps);
            let c = dot / denom;
            total -= c.abs() / n;
            if let Some((ga, gb)) = grads.as_mut() {
                let sign = if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let through_denom = na * nb > eps;
                for j in 0..a.cols() {
                    let mut da = rb[j] / denom;
                    let mut db = ra[j] / denom;
                    if through_denom {
                        da -= dot * ra[j] / (na * na * denom);
                        db -= dot * rb[j] / (nb * nb * denom);
                    }
                    let cur = ga.get(r, j);
                    ga.set(r, j, cur - sign * da / n);
                    let cur = gb.get(r, j);
                    gb.set(r, j, cur - sign * db / n);
                }
            }
        }
        total
    } else {
        let dots: Vec<f64> = (0..a.rows())
            .map(|r| a.row(r).iter().zip(b.row(r)).map(|(x, y)| x * y).sum())
            .collect();
        let norm_a_sq: f64 = a.data().iter().map(|x| x * x).sum();
        let norm_b_sq: f64 = b.data().iter().map(|x| x * x).sum();
        let denom = norm_a_sq.max(norm_b_sq).max(eps);
        let abs_sum: f64 = dots.iter().map(|d| d.abs()).sum();
        let value = -abs_sum / (n * denom);
        if let Some((ga, gb)) = grads {
            for r in 0..a.rows() {
                let sign = if dots[r] > 0.0 {
                    1.0
                } else if dots[r] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                for j in 0..a.cols() {
                    let cur = ga.get(r, j);
                    ga.set(r, j, cur - sign * b.get(r, j) / (n * denom));
                    let cur = gb.get(r, j);
                    gb.set(r, j, cur - sign * a.get(r, j) / (n * denom));
                }
            }
            // The max() denominator: route through whichever squared norm won.
            if denom > eps {
                let d_denom = abs_sum / (n * denom * denom);
                let (winner, g) = if norm_a_sq >= norm_b_sq { (a, ga) } else { (b, gb) };
                for (out, &w) in g.data_mut().iter_mut().zip(winner.data().iter()) {
                    *out += d_denom * 2.0 * w;
                }
            }
        }
        value
    }
}

/// Rowwise KL divergence after `eps`-shift and row normalization.
fn kl_pair(
    a: &Matrix,
    b: &Matrix,
    eps: f64,
    mut grads: Option<(&mut Matrix, &mut Matrix)>,
) -> f64 {
    let n = a.rows() as f64;
    let d = a.cols();
    let mut total = 0.0;
    for r in 0..a.rows() {
        let pa: Vec<f64> = a.row(r).iter().map(|x| x + eps).collect();
        let pb: Vec<f64> = b.row(r).iter().map(|x| x + eps).collect();
        let sa: f64 = pa.iter().sum();
        let sb: f64 = pb.iter().sum();
        let p: Vec<f64> = pa.iter().map(|x| x / sa).collect();
        let q: Vec<f64> = pb.iter().map(|x| x / sb).collect();
        let row_kl: f64 = p
            .iter()
            .zip(&q)
            .map(|(&pi, &qi)| pi * (pi / qi).ln())
            .sum();
        total += row_kl.abs() / n;
        if let Some((ga, gb)) = grads.as_mut() {
            let sign = if row_kl > 0.0 {
                1.0
            } else if row_kl < 0.0 {
                -1.0
            } else {
                0.0
            };
            // dD/dp_j and dD/dq_j, then back through the row normalization.
            let gp: Vec<f64> = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| sign * ((pi / qi).ln() + 1.0) / n)
                .collect();
            let gq: Vec<f64> = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| -sign * (pi / qi) / n)
                .collect();
            let dot_p: f64 = gp.iter().zip(&p).map(|(g, v)| g * v).sum();
            let dot_q: f64 = gq.iter().zip(&q).map(|(g, v)| g * v).sum();
            for j in 0..d {
                let cur = ga.get(r, j);
                ga.set(r, j, cur + (gp[j] - dot_p) / sa);
                let cur = gb.get(r, j);
                gb.set(r, j, cur + (gq[j] - dot_q) / sb);
            }
        }
    }
    total
}

/// `(1/N_s)` times the Frobenius norm of the difference stack.
fn mse_pair(a: &Matrix, b: &Matrix, grads: Option<(&mut Matrix, &mut Matrix)>) -> f64 {
    let n = a.rows() as f64;
    let mut sq = 0.0;
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        let d = x - y;
        sq += d * d;
    }
    let norm = sq.sqrt();
    if let Some((ga, gb)) = grads {
        if norm > 0.0 {
            for (idx, (x, y)) in a.data().iter().zip(b.data().iter()).enumerate() {
                let g = (x - y) / (norm * n);
                ga.data_mut()[idx] += g;
                gb.data_mut()[idx] -= g;
            }
        }
    }
    norm / n
}

/// Monte Carlo sliced-Wasserstein distance between two point stacks.
///
/// Stacks of unequal size are padded by resampling the smaller one with
/// replacement up to the larger size.
pub fn sw_distance(h0: &Matrix, h1: &Matrix, n_slices: usize, rng: &mut Rng) -> Result<f64> {
    if h0.rows() == 0 || h1.rows() == 0 {
        return Err(Error::Domain("sliced-Wasserstein needs non-empty sets".into()));
    }
    if h0.cols() != h1.cols() {
        return Err(Error::Dimension {
            op: "sw_distance",
            lhs_rows: h0.rows(),
            lhs_cols: h0.cols(),
            rhs_rows: h1.rows(),
            rhs_cols: h1.cols(),
        });
    }
    if n_slices == 0 {
        return Err(Error::Domain("need at least one slice".into()));
    }
    let slices = unit_slices(h0.cols(), n_slices, rng);
    let n = h0.rows().max(h1.rows());
    let a = pad_matrix(h0, n, rng);
    let b = pad_matrix(h1, n, rng);
    Ok(sw_pair(&a, &b, &slices, None))
}

/// Sliced-Wasserstein with caller-provided slice vectors (no padding:
/// stacks must already have equal row counts).
pub fn sw_distance_with_slices(h0: &Matrix, h1: &Matrix, slices: &[Vec<f64>]) -> Result<f64> {
    if h0.rows() == 0 || h1.rows() == 0 {
        return Err(Error::Domain("sliced-Wasserstein needs non-empty sets".into()));
    }
    check_equal_shapes("sw_distance_with_slices", h0, h1)?;
    if slices.is_empty() || slices.iter().any(|v| v.len() != h0.cols()) {
        return Err(Error::Domain("slice vectors must match the column count".into()));
    }
    Ok(sw_pair(h0, h1, slices, None))
}

fn pad_matrix(m: &Matrix, target_rows: usize, rng: &mut Rng) -> Matrix {
    if m.rows() == target_rows {
        return m.clone();
    }
    let mut rows: Vec<usize> = (0..m.rows()).collect();
    while rows.len() < target_rows {
        rows.push(rng.next_below(m.rows()));
    }
    m.select_rows(&rows)
}

/// Negative cosine similarity between equally sized sampled stacks.
pub fn cosine_distance(h0s: &Matrix, h1s: &Matrix, eps: f64) -> Result<f64> {
    check_equal_shapes("cosine_distance", h0s, h1s)?;
    if h0s.rows() == 0 {
        return Err(Error::Domain("cosine distance needs non-empty stacks".into()));
    }
    Ok(cosine_pair(h0s, h1s, eps, false, None))
}

/// Per-row variant of [`cosine_distance`] (documented deviation from the
/// stack-level denominator).
pub fn cosine_distance_per_row(h0s: &Matrix, h1s: &Matrix, eps: f64) -> Result<f64> {
    check_equal_shapes("cosine_distance_per_row", h0s, h1s)?;
    if h0s.rows() == 0 {
        return Err(Error::Domain("cosine distance needs non-empty stacks".into()));
    }
    Ok(cosine_pair(h0s, h1s, eps, true, None))
}

/// Rowwise KL divergence between equally sized sampled stacks. Entries are
/// shifted by `eps` and row-normalized, so any nonnegative input is safe.
pub fn kl_distance(h0s: &Matrix, h1s: &Matrix, eps: f64) -> Result<f64> {
    check_equal_shapes("kl_distance", h0s, h1s)?;
    if h0s.rows() == 0 {
        return Err(Error::Domain("kl distance needs non-empty stacks".into()));
    }
    Ok(kl_pair(h0s, h1s, eps, None))
}

/// Mean-square-error distance between equally sized sampled stacks.
pub fn mse_distance(h0s: &Matrix, h1s: &Matrix) -> Result<f64> {
    check_equal_shapes("mse_distance", h0s, h1s)?;
    if h0s.rows() == 0 {
        return Err(Error::Domain("mse distance needs non-empty stacks".into()));
    }
    Ok(mse_pair(h0s, h1s, None))
}

/// One sampled subgroup pair within a [`DistanceDraw`].
#[derive(Debug, Clone)]
pub struct PairDraw {
    /// Utility class this pair is conditioned on (`None` when unconditioned).
    pub class: Option<u8>,
    pub group_a: usize,
    pub group_b: usize,
    /// Row indices into the representation matrix (already padded for SW,
    /// sampled with replacement for the other kinds).
    pub rows_a: Vec<usize>,
    pub rows_b: Vec<usize>,
    /// Unit projection vectors (SW only, empty otherwise).
    pub slices: Vec<Vec<f64>>,
}

/// A realized sampling of the subgroup distance: which rows enter each
/// pairwise comparison and which slice vectors are used. Sampling once and
/// evaluating value and gradient against the same draw keeps the two
/// consistent within an optimization step.
#[derive(Debug, Clone)]
pub struct DistanceDraw {
    pub pairs: Vec<PairDraw>,
    pub spec: DistanceSpec,
}

impl DistanceDraw {
    /// Sample a draw for the given subgroup view. `hidden_dim` is the width
    /// of the representation the draw will be evaluated against.
    pub fn sample(
        groups: &SubgroupView,
        spec: &DistanceSpec,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        spec.validate()?;
        let n_groups = groups.n_sensitive_classes();
        if n_groups < 2 {
            return Err(Error::Domain("need at least two sensitive classes".into()));
        }
        let classes: Vec<Option<u8>> = if spec.class_conditioned {
            let present = groups.utility_classes();
            if present.is_empty() {
                return Err(Error::Domain("empty subgroup view".into()));
            }
            present.into_iter().map(Some).collect()
        } else {
            vec![None]
        };

        let mut pairs = Vec::new();
        for &class in &classes {
            // Membership per group under this conditioning.
            let mut members: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
            for g in 0..n_groups {
                let rows = match class {
                    Some(y) => groups.cell(y, g).to_vec(),
                    None => groups.group(g),
                };
                if rows.is_empty() {
                    return match class {
                        Some(y) => Err(Error::EmptyCell { y, s: g }),
                        None => Err(Error::Domain(format!("sensitive group {g} is empty"))),
                    };
                }
                members.push(rows);
            }
            for a in 0..n_groups {
                for b in (a + 1)..n_groups {
                    let (rows_a, rows_b, slices) = match spec.kind {
                        DistanceKind::Sw => {
                            let n = members[a].len().max(members[b].len());
                            let rows_a = pad_rows(&members[a], n, rng);
                            let rows_b = pad_rows(&members[b], n, rng);
                            (rows_a, rows_b, unit_slices(hidden_dim, spec.slices, rng))
                        }
                        _ => {
                            let auto = members[a].len().min(members[b].len()).min(256).max(1);
                            let n_s = spec.n_samples.unwrap_or(auto);
                            let sample = |src: &[usize], rng: &mut Rng| {
                                (0..n_s).map(|_| src[rng.next_below(src.len())]).collect()
                            };
                            let rows_a: Vec<usize> = sample(&members[a], rng);
                            let rows_b: Vec<usize> = sample(&members[b], rng);
                            (rows_a, rows_b, Vec::new())
                        }
                    };
                    pairs.push(PairDraw {
                        class,
                        group_a: a,
                        group_b: b,
                        rows_a,
                        rows_b,
                        slices,
                    });
                }
            }
        }
        Ok(DistanceDraw {
            pairs,
            spec: spec.clone(),
        })
    }

    /// Distance value for representations `h` under this draw: the mean
    /// over utility classes of the mean pairwise subgroup distance.
    pub fn value(&self, h: &Matrix) -> Result<f64> {
        self.evaluate(h, None).map(|(v, _)| v)
    }

    /// Value plus gradient with respect to every row of `h`.
    pub fn value_and_grad(&self, h: &Matrix) -> Result<(f64, Matrix)> {
        let grad = Matrix::zeros(h.rows(), h.cols());
        self.evaluate(h, Some(grad))
    }

    fn evaluate(&self, h: &Matrix, mut grad: Option<Matrix>) -> Result<(f64, Matrix)> {
        // class tag -> (sum of pair distances, pair count)
        let mut per_class: BTreeMap<Option<u8>, (f64, usize)> = BTreeMap::new();
        for pair in &self.pairs {
            per_class.entry(pair.class).or_insert((0.0, 0)).1 += 1;
        }
        let n_classes = per_class.len() as f64;

        for pair in &self.pairs {
            let a = h.select_rows(&pair.rows_a);
            let b = h.select_rows(&pair.rows_b);
            let n_pairs = per_class[&pair.class].1 as f64;
            // Weight of this pair in the overall mean-of-means.
            let weight = 1.0 / (n_classes * n_pairs);
            let (value, grads_ab) = if grad.is_some() {
                let mut ga = Matrix::zeros(a.rows(), a.cols());
                let mut gb = Matrix::zeros(b.rows(), b.cols());
                let v = self.pair_value(&a, &b, pair, Some((&mut ga, &mut gb)));
                (v, Some((ga, gb)))
            } else {
                (self.pair_value(&a, &b, pair, None), None)
            };
            per_class.get_mut(&pair.class).unwrap().0 += value;
            if let (Some(g), Some((ga, gb))) = (grad.as_mut(), grads_ab) {
                for (t, &row) in pair.rows_a.iter().enumerate() {
                    for j in 0..h.cols() {
                        let cur = g.get(row, j);
                        g.set(row, j, cur + weight * ga.get(t, j));
                    }
                }
                for (t, &row) in pair.rows_b.iter().enumerate() {
                    for j in 0..h.cols() {
                        let cur = g.get(row, j);
                        g.set(row, j, cur + weight * gb.get(t, j));
                    }
                }
            }
        }

        let value = per_class
            .values()
            .map(|(sum, count)| sum / *count as f64)
            .sum::<f64>()
            / n_classes;
        if !value.is_finite() {
            return Err(Error::Numeric("subgroup distance is not finite".into()));
        }
        Ok((value, grad.unwrap_or_else(|| Matrix::zeros(0, 0))))
    }

    fn pair_value(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &PairDraw,
        grads: Option<(&mut Matrix, &mut Matrix)>,
    ) -> f64 {
        match self.spec.kind {
            DistanceKind::Sw => sw_pair(a, b, &pair.slices, grads),
            DistanceKind::Cosine => {
                cosine_pair(a, b, self.spec.eps, self.spec.per_row_cosine, grads)
            }
            DistanceKind::Kl => kl_pair(a, b, self.spec.eps, grads),
            DistanceKind::Mse => mse_pair(a, b, grads),
        }
    }
}

/// Distance between subgroup representations under `spec`, sampling with
/// `rng`. Class-conditioned by default: the mean over utility classes of
/// the mean pairwise subgroup distance within that class.
pub fn subgroup_distance(
    h: &Matrix,
    groups: &SubgroupView,
    spec: &DistanceSpec,
    rng: &mut Rng,
) -> Result<f64> {
    if groups.viewed_len() != h.rows() {
        return Err(Error::Domain(format!(
            "subgroup view covers {} rows but representations have {}",
            groups.viewed_len(),
            h.rows()
        )));
    }
    DistanceDraw::sample(groups, spec, h.cols(), rng)?.value(h)
}

fn pad_rows(src: &[usize], target: usize, rng: &mut Rng) -> Vec<usize> {
    let mut rows = src.to_vec();
    while rows.len() < target {
        rows.push(src[rng.next_below(src.len())]);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sw_identical_sets_are_zero() {
        let a = m(&[vec![1.0, 2.0], vec![-0.5, 0.25]]);
        let d = sw_distance(&a, &a, 16, &mut Rng::new(0)).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn sw_hand_example_one_dimensional() {
        // {0, 2} vs {1, 3} with the canonical slice: (1/2)((1-0)^2 + (3-2)^2) = 1.
        let a = m(&[vec![0.0], vec![2.0]]);
        let b = m(&[vec![1.0], vec![3.0]]);
        let d = sw_distance_with_slices(&a, &b, &[vec![1.0]]).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn sw_is_nonnegative() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let a = Matrix::from_vec(4, 3, (0..12).map(|_| rng.next_normal()).collect()).unwrap();
            let b = Matrix::from_vec(6, 3, (0..18).map(|_| rng.next_normal()).collect()).unwrap();
            let d = sw_distance(&a, &b, 8, &mut rng).unwrap();
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn sw_empty_set_is_domain_error() {
        let a = Matrix::zeros(0, 2);
        let b = m(&[vec![1.0, 2.0]]);
        assert!(matches!(
            sw_distance(&a, &b, 4, &mut Rng::new(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sw_canonical_slice_matches_exact_1d_wasserstein() {
        let mut rng = Rng::new(17);
        for _ in 0..100 {
            let n = 2 + rng.next_below(30);
            let xs: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            let a = Matrix::from_vec(n, 1, xs.clone()).unwrap();
            let b = Matrix::from_vec(n, 1, ys.clone()).unwrap();
            let d = sw_distance_with_slices(&a, &b, &[vec![1.0]]).unwrap();
            let mut xs_sorted = xs;
            let mut ys_sorted = ys;
            xs_sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
            ys_sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
            let exact: f64 = xs_sorted
                .iter()
                .zip(&ys_sorted)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / n as f64;
            assert!((d - exact).abs() < 1e-9, "{d} vs {exact}");
        }
    }

    #[test]
    fn cosine_aligned_pair_is_minus_one() {
        let a = m(&[vec![1.0, 0.0]]);
        let d = cosine_distance(&a, &a, 1e-8).unwrap();
        assert!((d + 1.0).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn cosine_orthogonal_pair_is_zero() {
        let a = m(&[vec![1.0, 0.0]]);
        let b = m(&[vec![0.0, 1.0]]);
        assert_eq!(cosine_distance(&a, &b, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn cosine_all_zero_inputs_hit_the_eps_guard() {
        let a = Matrix::zeros(3, 4);
        assert_eq!(cosine_distance(&a, &a, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn kl_identical_rows_are_zero() {
        let a = m(&[vec![0.2, 0.8], vec![0.6, 0.4]]);
        let d = kl_distance(&a, &a, 1e-8).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn kl_hand_example() {
        let a = m(&[vec![0.5, 0.5]]);
        let b = m(&[vec![0.25, 0.75]]);
        let expect = 0.5 * 2.0_f64.ln() + 0.5 * (2.0_f64 / 3.0).ln();
        let d = kl_distance(&a, &b, 1e-8).unwrap();
        assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
    }

    #[test]
    fn kl_is_finite_on_random_nonnegative_inputs() {
        let mut rng = Rng::new(9);
        for _ in 0..50 {
            let a =
                Matrix::from_vec(3, 4, (0..12).map(|_| rng.next_f64() * 2.0).collect()).unwrap();
            let b =
                Matrix::from_vec(3, 4, (0..12).map(|_| rng.next_f64() * 2.0).collect()).unwrap();
            let d = kl_distance(&a, &b, 1e-8).unwrap();
            assert!(d.is_finite());
        }
    }

    #[test]
    fn mse_hand_example() {
        let a = m(&[vec![0.0, 0.0]]);
        let b = m(&[vec![3.0, 4.0]]);
        assert_eq!(mse_distance(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn mse_is_symmetric() {
        let mut rng = Rng::new(4);
        for _ in 0..30 {
            let a = Matrix::from_vec(5, 3, (0..15).map(|_| rng.next_normal()).collect()).unwrap();
            let b = Matrix::from_vec(5, 3, (0..15).map(|_| rng.next_normal()).collect()).unwrap();
            let d1 = mse_distance(&a, &b).unwrap();
            let d2 = mse_distance(&b, &a).unwrap();
            assert_eq!(d1, d2);
        }
    }

    #[test]
    fn identical_stacks_are_zero_for_sw_mse_kl() {
        let a = m(&[vec![0.3, 0.7], vec![1.5, 0.1], vec![0.0, 0.9]]);
        assert!(sw_distance(&a, &a, 8, &mut Rng::new(1)).unwrap().abs() < 1e-12);
        assert_eq!(mse_distance(&a, &a).unwrap(), 0.0);
        assert!(kl_distance(&a, &a, 1e-8).unwrap().abs() < 1e-12);
    }

    fn view_for(y: &[u8], s: &[usize], n_classes: usize) -> SubgroupView {
        let idx: Vec<usize> = (0..y.len()).collect();
        SubgroupView::new(y, s, &idx, n_classes)
    }

    #[test]
    fn subgroup_distance_zero_for_identical_clouds() {
        // Two sensitive classes with identical per-class point clouds.
        let h = m(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![0.0, 2.0],
        ]);
        let y = [0, 0, 1, 1];
        let s = [0, 1, 0, 1];
        let view = view_for(&y, &s, 2);
        for kind in [DistanceKind::Sw, DistanceKind::Mse, DistanceKind::Kl] {
            let spec = DistanceSpec {
                kind,
                ..DistanceSpec::default()
            };
            let d = subgroup_distance(&h, &view, &spec, &mut Rng::new(2)).unwrap();
            assert!(d.abs() < 1e-12, "{kind}: {d}");
        }
    }

    #[test]
    fn three_sensitive_classes_average_over_three_pairs() {
        let y = [0, 0, 0, 0, 0, 0];
        let s = [0, 0, 1, 1, 2, 2];
        let h = m(&[
            vec![0.0],
            vec![0.0],
            vec![1.0],
            vec![1.0],
            vec![3.0],
            vec![3.0],
        ]);
        let view = view_for(&y, &s, 3);
        let spec = DistanceSpec {
            kind: DistanceKind::Mse,
            n_samples: Some(2),
            class_conditioned: true,
            ..DistanceSpec::default()
        };
        let draw = DistanceDraw::sample(&view, &spec, 1, &mut Rng::new(0)).unwrap();
        assert_eq!(draw.pairs.len(), 3);
        let d = draw.value(&h).unwrap();
        // Groups are internally constant, so sampling with replacement is
        // exact: pair distances are sqrt(2*1)/2, sqrt(2*9)/2, sqrt(2*4)/2.
        let expect = (2.0_f64.sqrt() + 18.0_f64.sqrt() + 8.0_f64.sqrt()) / 6.0;
        assert!((d - expect).abs() < 1e-12, "{d} vs {expect}");
    }

    #[test]
    fn class_conditioned_sw_fixture_matches_hand_value() {
        // One utility class per half; groups alternate inside each class.
        // Class 0: group0 {0, 2}, group1 {1, 3}; class 1: identical clouds.
        let h = m(&[
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![5.0],
            vec![5.0],
        ]);
        let y = [0, 0, 0, 0, 1, 1];
        let s = [0, 1, 0, 1, 0, 1];
        let view = view_for(&y, &s, 2);
        let spec = DistanceSpec {
            kind: DistanceKind::Sw,
            slices: 1,
            class_conditioned: true,
            ..DistanceSpec::default()
        };
        let mut draw = DistanceDraw::sample(&view, &spec, 1, &mut Rng::new(0)).unwrap();
        for pair in &mut draw.pairs {
            pair.slices = vec![vec![1.0]];
        }
        // Class 0 contributes 1 (the hand example), class 1 contributes 0;
        // the class-conditioned mean is 1/2.
        let d = draw.value(&h).unwrap();
        assert!((d - 0.5).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn empty_cell_is_reported_with_its_coordinates() {
        let y = [0, 0, 1, 1];
        let s = [0, 0, 0, 1]; // cell (y=0, s=1) empty
        let view = view_for(&y, &s, 2);
        let spec = DistanceSpec::default();
        match DistanceDraw::sample(&view, &spec, 2, &mut Rng::new(0)) {
            Err(Error::EmptyCell { y: 0, s: 1 }) => {}
            other => panic!("expected empty cell (0, 1), got {other:?}"),
        }
    }

    #[test]
    fn sw_two_seeds_agree_at_high_slice_count() {
        let mut rng = Rng::new(33);
        let a = Matrix::from_vec(40, 8, (0..320).map(|_| rng.next_normal()).collect()).unwrap();
        let b =
            Matrix::from_vec(40, 8, (0..320).map(|_| rng.next_normal() + 0.5).collect()).unwrap();
        let d1 = sw_distance(&a, &b, 10_000, &mut Rng::new(100)).unwrap();
        let d2 = sw_distance(&a, &b, 10_000, &mut Rng::new(200)).unwrap();
        let rel = (d1 - d2).abs() / d1.abs().max(d2.abs());
        assert!(rel < 0.05, "relative disagreement {rel}");
    }
}
