//! Brute-force estimators of the restricted isometry constant `delta_s` and
//! the expansion constant `theta_s`, for sizes small enough to enumerate.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{MatrixKind, MeasurementMatrix};
use crate::error::{Error, Result};

/// Largest number of subsets an estimator will enumerate.
pub const SUBSET_BUDGET: u128 = 1_000_000;

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / (n as u128 + 1) {
            return u128::MAX;
        }
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            first: true,
            done: k > n,
        }
    }

    /// Advances to the next subset and returns it.
    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] != i + self.n - k {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
        self.done = true;
        None
    }
}

fn largest_eigen_deviation(gram: &DMatrix<f64>) -> f64 {
    let s = gram.nrows();
    match s {
        1 => (gram[(0, 0)] - 1.0).abs(),
        2 => {
            let (a, b, c) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            ((mid + rad) - 1.0).abs().max(((mid - rad) - 1.0).abs())
        }
        _ => SymmetricEigen::new(gram.clone())
            .eigenvalues
            .iter()
            .map(|l| (l - 1.0).abs())
            .fold(0.0, f64::max),
    }
}

/// Exact `delta_s` of `scale * A`: the largest `|lambda - 1|` over the
/// eigenvalues of every `s x s` column Gram matrix.
pub fn estimate_rip_constant(matrix: &MeasurementMatrix, s: usize) -> Result<f64> {
    let n = matrix.n();
    if s == 0 || s > n {
        return Err(Error::config(format!(
            "sparsity s must lie in 1..={n}, got {s}"
        )));
    }
    let count = binomial(n, s);
    if count > SUBSET_BUDGET {
        return Err(Error::Budget {
            count,
            budget: SUBSET_BUDGET,
        });
    }
    let dense = matrix.to_dense();
    let cols: Vec<Vec<f64>> = (0..n).map(|i| dense.column(i)).collect();
    let dot =
        |a: usize, b: usize| -> f64 { cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum() };
    let mut inner = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = dot(a, b);
            inner[a * n + b] = v;
            inner[b * n + a] = v;
        }
    }
    let mut delta: f64 = 0.0;
    let mut gram = DMatrix::<f64>::zeros(s, s);
    let mut it = Combinations::new(n, s);
    while let Some(subset) = it.next_subset() {
        for (r, &a) in subset.iter().enumerate() {
            for (c, &b) in subset.iter().enumerate() {
                gram[(r, c)] = inner[a * n + b];
            }
        }
        delta = delta.max(largest_eigen_deviation(&gram));
    }
    Ok(delta)
}

fn check_expander(matrix: &MeasurementMatrix, s: usize) -> Result<()> {
    if matrix.kind() != MatrixKind::Expander {
        return Err(Error::config(format!(
            "expansion constant needs an expander matrix, got {:?}",
            matrix.kind()
        )));
    }
    let n = matrix.n();
    if s == 0 || s > n {
        return Err(Error::config(format!(
            "subset size s must lie in 1..={n}, got {s}"
        )));
    }
    let count = (1..=s)
        .map(|k| binomial(n, k))
        .fold(0u128, u128::saturating_add);
    if count > SUBSET_BUDGET {
        return Err(Error::Budget {
            count,
            budget: SUBSET_BUDGET,
        });
    }
    Ok(())
}

/// Calls `visit(I, |N(I)|)` for every left-vertex set with `1 <= |I| <= s`.
pub fn for_each_neighborhood(
    matrix: &MeasurementMatrix,
    s: usize,
    mut visit: impl FnMut(&[usize], usize),
) -> Result<()> {
    check_expander(matrix, s)?;
    let mut stamp = vec![0u64; matrix.m()];
    let mut generation = 0u64;
    for k in 1..=s {
        let mut it = Combinations::new(matrix.n(), k);
        while let Some(subset) = it.next_subset() {
            generation += 1;
            let mut size = 0;
            for &i in subset {
                for &r in matrix.column_support(i).expect("expander columns") {
                    let slot = &mut stamp[r as usize];
                    if *slot != generation {
                        *slot = generation;
                        size += 1;
                    }
                }
            }
            visit(subset, size);
        }
    }
    Ok(())
}

/// Smallest `theta` with `|N(I)| >= (1 - theta) d |I|` for all `|I| <= s`.
pub fn estimate_expander_theta(matrix: &MeasurementMatrix, s: usize) -> Result<f64> {
    let d = matrix.d() as f64;
    let mut worst = f64::INFINITY;
    for_each_neighborhood(matrix, s, |subset, size| {
        worst = worst.min(size as f64 / (d * subset.len() as f64));
    })?;
    Ok(1.0 - worst)
}
