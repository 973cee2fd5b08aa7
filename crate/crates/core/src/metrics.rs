//! Vector functionals from sparse approximation theory and the error
//! measures used to compare reconstructions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::ReconImage;

/// `(sum |x_i|^p)^(1/p)`; a quasi-norm for `p < 1`.
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("l^p norm needs p > 0, got {p}")));
    }
    if p == 1.0 {
        return Ok(x.iter().map(|v| v.abs()).sum());
    }
    if p == 2.0 {
        return Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Number of nonzero entries.
pub fn l0_norm(x: &[f64]) -> usize {
    x.iter().filter(|&&v| v != 0.0).count()
}

/// `sigma_s(x)`: l1 distance from `x` to its best `s`-term approximation,
/// i.e. the sum of the `n - s` smallest magnitudes.
pub fn best_s_term_error(x: &[f64], s: usize) -> f64 {
    if s >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    mags[..x.len() - s].iter().sum()
}

/// Checks `sigma_s(x) <= q (1 - q)^(1/q - 1) s^(1 - 1/q) ||x||_q` for
/// `q in (0, 1)` and `s >= 1`.
pub fn compressibility_check(x: &[f64], q: f64, s: usize) -> Result<bool> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "compressibility exponent must lie in (0, 1), got {q}"
        )));
    }
    if s == 0 {
        return Err(Error::Domain("compressibility bound needs s >= 1".into()));
    }
    let bound = q * (1.0 - q).powf(1.0 / q - 1.0) * (s as f64).powf(1.0 - 1.0 / q) * lp_norm(x, q)?;
    let sigma = best_s_term_error(x, s);
    // allow for rounding in the two sums
    Ok(sigma <= bound * (1.0 + 1e-12) + f64::MIN_POSITIVE)
}

/// `(sum_k |rec_k - truth_k|^alpha / N)^(1/alpha)`.
pub fn normalized_error(rec: &ReconImage, truth: &ReconImage, alpha: f64) -> Result<f64> {
    if rec.grid() != truth.grid() {
        return Err(Error::Dimension("images live on different grids".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n = rec.values().len() as f64;
    let sum: f64 = rec
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).abs().powf(alpha))
        .sum();
    Ok((sum / n).powf(1.0 / alpha))
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: String,
    pub alpha: u32,
    pub value: f64,
    pub m: usize,
    pub n: usize,
}

impl ErrorReport {
    pub fn compression_factor(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    pub const CSV_HEADER: &'static str = "method,alpha,value,m,n,compression_factor";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.alpha,
            self.value,
            self.m,
            self.n,
            self.compression_factor()
        )
    }
}

/// Normalized l1 and l2 errors of `rec` against `truth`.
pub fn error_reports(
    method: &str,
    rec: &ReconImage,
    truth: &ReconImage,
    m: usize,
    n: usize,
) -> Result<Vec<ErrorReport>> {
    [1u32, 2]
        .iter()
        .map(|&alpha| {
            Ok(ErrorReport {
                method: method.to_string(),
                alpha,
                value: normalized_error(rec, truth, alpha as f64)?,
                m,
                n,
            })
        })
        .collect()
}

/// Counts of the values after mapping `[min, max]` onto `[0, 1]`, in
/// `n_bins` equal bins; the maximum falls in the last bin. Constant data
/// land in the first bin.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if n_bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(Error::config("histogram of empty data"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mut counts = vec![0; n_bins];
    let span = hi - lo;
    for &v in values {
        let u = if span > 0.0 { (v - lo) / span } else { 0.0 };
        let bin = ((u * n_bins as f64) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(counts)
}

/// Bin of [`histogram`] that contains the raw value `value`.
pub fn histogram_bin_of(values: &[f64], n_bins: usize, value: f64) -> usize {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    let u = if span > 0.0 { (value - lo) / span } else { 0.0 };
    ((u.clamp(0.0, 1.0) * n_bins as f64) as usize).min(n_bins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{build_recon_grid, Axis};
    use proptest::prelude::*;

    #[test]
    fn norms() {
        assert_eq!(lp_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(lp_norm(&[0.0; 4], 0.5).unwrap(), 0.0);
        assert_eq!(l0_norm(&[0.0; 4]), 0);
        assert!((lp_norm(&[1.0, 1.0, 1.0], 0.5).unwrap() - 9.0).abs() < 1e-12);
        assert!(lp_norm(&[1.0], 0.0).is_err());
        assert_eq!(l0_norm(&[0.0, -1e-300, 2.0]), 2);
    }

    #[test]
    fn best_s_term_examples() {
        assert_eq!(best_s_term_error(&[0.0, 2.0, 0.0, -1.0], 2), 0.0);
        assert_eq!(best_s_term_error(&[3.0, -1.0, 0.5], 1), 1.5);
        assert_eq!(best_s_term_error(&[3.0, -1.0, 0.5], 0), 4.5);
    }

    fn exhaustive_sigma(x: &[f64], s: usize) -> f64 {
        let n = x.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize > s {
                continue;
            }
            let err: f64 = (0..n)
                .filter(|i| mask & (1 << i) == 0)
                .map(|i| x[i].abs())
                .sum();
            best = best.min(err);
        }
        best
    }

    #[test]
    fn compressibility_needs_valid_arguments() {
        assert!(compressibility_check(&[1.0], 0.5, 0).is_err());
        assert!(compressibility_check(&[1.0], 1.0, 1).is_err());
        let mut e1 = vec![0.0; 10];
        e1[0] = 1.0;
        for s in 1..=10 {
            assert!(compressibility_check(&e1, 0.5, s).unwrap());
        }
    }

    fn image(values: Vec<f64>) -> ReconImage {
        let g = build_recon_grid(
            Axis::new(0.0, 1.0, values.len()).unwrap(),
            Axis::new_or_point(0.0, 0.0, 1).unwrap(),
            Axis::new_or_point(0.0, 0.0, 1).unwrap(),
        )
        .unwrap();
        ReconImage::new(g, values).unwrap()
    }

    #[test]
    fn normalized_error_examples() {
        let truth = image(vec![0.0, 1.0, 1.0, 0.0, 0.5]);
        assert_eq!(normalized_error(&truth, &truth, 1.0).unwrap(), 0.0);
        let shifted = image(truth.values().iter().map(|v| v + 0.25).collect());
        assert!((normalized_error(&shifted, &truth, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((normalized_error(&shifted, &truth, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let other = image(vec![0.0; 4]);
        assert!(normalized_error(&other, &truth, 1.0).is_err());
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram(&[2.0; 7], 4).unwrap(), vec![7, 0, 0, 0]);
        let ramp: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(histogram(&ramp, 10).unwrap(), vec![10; 10]);
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&[1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn sigma_matches_exhaustive_search(x in prop::collection::vec(-5.0f64..5.0, 1..=12)) {
            for s in 0..=x.len() {
                let fast = best_s_term_error(&x, s);
                let slow = exhaustive_sigma(&x, s);
                prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow));
            }
        }

        #[test]
        fn sigma_is_monotone(x in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let n = x.len();
            prop_assert!((best_s_term_error(&x, 0) - lp_norm(&x, 1.0).unwrap()).abs() < 1e-12);
            prop_assert_eq!(best_s_term_error(&x, n), 0.0);
            for s in 1..=n {
                prop_assert!(best_s_term_error(&x, s) <= best_s_term_error(&x, s - 1));
            }
        }

        #[test]
        fn norm_ordering(x in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let inf = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let l2 = lp_norm(&x, 2.0).unwrap();
            let l1 = lp_norm(&x, 1.0).unwrap();
            prop_assert!(inf <= l2 * (1.0 + 1e-12));
            prop_assert!(l2 <= l1 * (1.0 + 1e-12));
        }

        #[test]
        fn compressibility_always_holds(
            x in prop::collection::vec(-3.0f64..3.0, 1..30),
            qi in 0usize..3,
        ) {
            let q = [0.25, 0.5, 0.75][qi];
            for s in 1..=x.len() {
                prop_assert!(compressibility_check(&x, q, s).unwrap());
            }
        }
    }
}
