//! Finite-difference gradient checking.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central differences.
///
/// Returns the maximum over coordinates of
/// `|central_difference - analytic| / max(1, |analytic|)`.
///
/// `loss_fn` is evaluated at `params` with one coordinate displaced by
/// `±h` at a time; the vector passed to it is restored between calls.
pub fn grad_check<F>(mut loss_fn: F, params: &[f64], analytic_grad: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::Domain(format!("step size h must be positive, got {h}")));
    }
    if params.len() != analytic_grad.len() {
        return Err(Error::Domain(format!(
            "gradient length {} does not match parameter length {}",
            analytic_grad.len(),
            params.len()
        )));
    }
    let mut point = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let original = point[i];
        point[i] = original + h;
        let up = loss_fn(&point)?;
        point[i] = original - h;
        let down = loss_fn(&point)?;
        point[i] = original;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite near coordinate {i}"
            )));
        }
        let central = (up - down) / (2.0 * h);
        let rel = (central - analytic_grad[i]).abs() / analytic_grad[i].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        let f = |w: &[f64]| Ok(w[0] * w[0]);
        let err = grad_check(f, &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-8, "error {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let f = |_: &[f64]| Ok(4.2);
        let err = grad_check(f, &[1.0, 2.0], &[0.0, 0.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        // f(w) = w^2 at w=3: true gradient 6; claimed gradient 12 (off by 2x).
        // |6 - 12| / max(1, 12) = 0.5.
        let f = |w: &[f64]| Ok(w[0] * w[0]);
        let err = grad_check(f, &[3.0], &[12.0], 1e-5).unwrap();
        assert!((err - 0.5).abs() < 1e-6, "error {err}");
    }

    #[test]
    fn non_finite_loss_is_a_numeric_error() {
        let f = |w: &[f64]| Ok(1.0 / (w[0] - w[0]));
        assert!(matches!(
            grad_check(f, &[1.0], &[0.0], 1e-5),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn rejects_nonpositive_step() {
        let f = |w: &[f64]| Ok(w[0]);
        assert!(grad_check(f, &[1.0], &[1.0], 0.0).is_err());
    }
}
