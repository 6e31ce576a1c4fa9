//! Sample quantiles and small statistics helpers.

use crate::error::{Error, Result};

/// Type-7 (linear interpolation) sample quantile.
///
/// The value at position `q * (n - 1)` in the sorted sample, interpolating
/// linearly between neighbors. This is the common default in R/NumPy and is
/// what every quantile-based threshold in this crate uses.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile q={q} outside [0,1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    Ok(quantile_sorted(&sorted, q))
}

/// Type-7 quantile of an already ascending-sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Population mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n).
pub fn pop_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_four() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
    }

    #[test]
    fn type7_interpolation() {
        // position 0.25 * 5 = 1.25 in sorted [50,80,81,82,83,84]
        let v = quantile(&[50.0, 80.0, 81.0, 82.0, 83.0, 84.0], 0.25).unwrap();
        assert!((v - 80.25).abs() < 1e-12);
    }

    #[test]
    fn q_zero_is_min_q_one_is_max() {
        let xs = [3.0, -1.0, 7.5, 2.0];
        assert_eq!(quantile(&xs, 0.0).unwrap(), -1.0);
        assert_eq!(quantile(&xs, 1.0).unwrap(), 7.5);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(quantile(&[], 0.5).is_err());
    }
}
