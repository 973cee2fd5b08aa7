use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A real `rows x cols` matrix accessed only through products.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `y = A x`, overwriting `y`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `x = A^T y`, overwriting `x`.
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]);

    /// Spectral norm `||A||_2`. The default runs [`power_iteration`].
    fn norm_estimate(&self) -> f64 {
        power_iteration(self, 0x5eed, 1e-6, 1000).unwrap_or(0.0)
    }
}

/// Largest singular value by power iteration on `A^T A`, stopping when the
/// estimate changes by less than `rel_tol` (relative) between iterations.
pub fn power_iteration<A: LinearOperator + ?Sized>(
    op: &A,
    seed: u64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = op.cols();
    let m = op.rows();
    if n == 0 || m == 0 {
        return Err(Error::Numeric(
            "power iteration on an empty operator".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut av = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let norm = l2(&v);
        if norm == 0.0 {
            return Err(Error::Numeric("power iteration collapsed to zero".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        op.apply(&v, &mut av);
        let next = l2(&av);
        op.apply_adjoint(&av, &mut w);
        std::mem::swap(&mut v, &mut w);
        if next == 0.0 {
            // v lies in the kernel; an all-zero operator stays there.
            if l2(&v) == 0.0 {
                return Ok(0.0);
            }
            continue;
        }
        let done = (next - sigma).abs() <= rel_tol * next;
        sigma = next;
        if done {
            break;
        }
    }
    Ok(sigma)
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows} x {cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        (0..n).for_each(|i| data[i * n + i] = 1.0);
        DenseMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= factor);
        self
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (out, a) in x.iter_mut().zip(row) {
                *out += a * yr;
            }
        }
    }
}
