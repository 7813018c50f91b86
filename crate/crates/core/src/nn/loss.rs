use crate::error::{Error, Result};

/// Basin-weighted squared error, averaged over non-missing targets:
/// `mean((y - yhat)^2 / (sigma^2 + eps))`.
///
/// All three slices are aligned element by element; `sigmas` holds the
/// basin sigma of each element's station in normalized units.
pub fn norm_mse_loss(pred: &[f64], target: &[Option<f64>], sigmas: &[f64], epsilon: f64) -> Result<f64> {
    if pred.len() != target.len() || pred.len() != sigmas.len() {
        return Err(Error::Shape {
            what: "loss inputs".into(),
            expected: pred.len(),
            got: if target.len() != pred.len() { target.len() } else { sigmas.len() },
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, t), s) in pred.iter().zip(target).zip(sigmas) {
        if let Some(y) = t {
            sum += (y - p) * (y - p) / (s * s + epsilon);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::domain("no unmasked targets in loss"));
    }
    Ok(sum / n as f64)
}

/// Sum of the weighted squared errors for one sequence and its gradient
/// with respect to `pred` written into `d_pred`. Returns `(sum, count)`.
pub fn sequence_loss(pred: &[f64], target: &[Option<f64>], sigma: f64, epsilon: f64, d_pred: &mut [f64]) -> (f64, usize) {
    let w = 1.0 / (sigma * sigma + epsilon);
    let mut sum = 0.0;
    let mut n = 0;
    for ((p, t), d) in pred.iter().zip(target).zip(d_pred.iter_mut()) {
        match t {
            Some(y) => {
                let e = p - y;
                sum += e * e * w;
                *d = 2.0 * e * w;
                n += 1;
            }
            None => *d = 0.0,
        }
    }
    (sum, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_evaluation() {
        let l = norm_mse_loss(&[2.0], &[Some(1.0)], &[0.9f64.sqrt()], 0.1).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert_eq!(norm_mse_loss(&[1.0, 2.0], &[Some(1.0), Some(2.0)], &[1.0, 1.0], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn missing_targets_are_masked() {
        let l = norm_mse_loss(&[0.0, 100.0], &[Some(1.0), None], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(l, 1.0);
        assert!(norm_mse_loss(&[0.0], &[None], &[1.0], 0.1).is_err());
        assert!(norm_mse_loss(&[0.0], &[Some(0.0), None], &[1.0], 0.1).is_err());
    }

    #[test]
    fn low_variance_basin_dominates() {
        let (a, b) = (10.0f64, 0.1f64);
        let la = norm_mse_loss(&[1.0], &[Some(0.0)], &[a], 0.1).unwrap();
        let lb = norm_mse_loss(&[1.0], &[Some(0.0)], &[b], 0.1).unwrap();
        assert!(lb > la);
        assert!(((lb / la) - (a * a + 0.1) / (b * b + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn sequence_gradient() {
        let mut d = [9.0; 3];
        let (s, n) = sequence_loss(&[1.0, 2.0, 3.0], &[Some(0.0), None, Some(3.0)], 1.0, 1.0, &mut d);
        assert_eq!((s, n), (0.5, 2));
        assert_eq!(d, [1.0, 0.0, 0.0]);
    }
}
