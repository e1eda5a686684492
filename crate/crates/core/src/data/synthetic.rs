//! Synthetic biased-data generator used as a debiasing oracle in tests.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Generate a dataset with a controllable base-rate gap between two groups.
///
/// Generative process per instance:
///
/// ```text
/// s           ~ Bernoulli(0.5)
/// x1, x2      ~ N(0, 1)                         (informative)
/// x3          = s + 0.5 * N(0, 1)               (noisy copy of s: leakage)
/// x4..xd      ~ N(0, 1)                         (noise)
/// u           = (x1 + x2) / sqrt(2) + 0.25 * N(0, 1)
/// y0          = 1 if u > 0 else 0               (unbiased label, base rate 1/2)
/// y           = flip(y0)
/// ```
///
/// where `flip` pushes group 0 toward the positive label and group 1 away
/// from it, each with probability `bias`:
///
/// ```text
/// s = 0, y0 = 0:  y = 1 with probability bias
/// s = 1, y0 = 1:  y = 0 with probability bias
/// ```
///
/// Since `P(y0 = 1) = 1/2` independent of `s`, the expected base-rate gap
/// `P(y=1 | s=0) - P(y=1 | s=1)` equals `bias` exactly.
pub fn make_synthetic(n: usize, d: usize, bias: f64, rng: &mut Rng) -> Result<Dataset> {
    if n < 40 {
        return Err(Error::Domain(format!("need n >= 40, got {n}")));
    }
    if d < 3 {
        return Err(Error::Domain(format!("need d >= 3, got {d}")));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::Domain(format!("bias must be in [0, 1], got {bias}")));
    }

    let mut data = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for r in 0..n {
        let group = usize::from(rng.bernoulli(0.5));
        let x1 = rng.next_normal();
        let x2 = rng.next_normal();
        data[r * d] = x1;
        data[r * d + 1] = x2;
        data[r * d + 2] = group as f64 + 0.5 * rng.next_normal();
        for c in 3..d {
            data[r * d + c] = rng.next_normal();
        }
        let latent = (x1 + x2) / std::f64::consts::SQRT_2 + 0.25 * rng.next_normal();
        let mut label = u8::from(latent > 0.0);
        if group == 0 && label == 0 && rng.bernoulli(bias) {
            label = 1;
        } else if group == 1 && label == 1 && rng.bernoulli(bias) {
            label = 0;
        }
        y.push(label);
        s.push(group);
    }

    let mut feature_names = vec![
        "informative_1".to_string(),
        "informative_2".to_string(),
        "group_leak".to_string(),
    ];
    for c in 3..d {
        feature_names.push(format!("noise_{}", c - 2));
    }
    let x = Matrix::from_vec(n, d, data)?;
    Dataset::new(x, y, s, feature_names, "group".into(), 2)
}
