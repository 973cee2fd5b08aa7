//! Per-time-slice sparse recovery: FISTA on the l1-Tikhonov functional
//! `1/2 ||y - A x||^2 + lambda ||x||_1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::DetectorTraces;
use crate::grids::{DetectorGrid, TimeGrid};
use crate::sensing::{CsData, LinearOperator, MeasurementMatrix};

/// Operators with `||A||_2` above `1 + NORM_SLACK` are rejected.
pub const NORM_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub n_iter: usize,
    /// Constant step size, relative to a unit-norm operator.
    pub step: f64,
    /// Stop once the relative objective change drops below this; `0`
    /// always runs `n_iter` iterations.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1e-5,
            n_iter: 7500,
            step: 1.0,
            tolerance: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.n_iter == 0 {
            return Err(Error::config("n_iter must be at least 1"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::config(format!(
                "step must lie in (0, 1], got {}",
                self.step
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// Componentwise `sign(v) max(|v| - tau, 0)`.
pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink(x, tau)).collect()
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `1/2 ||y - A x||^2 + lambda ||x||_1`.
pub fn objective<A: LinearOperator + ?Sized>(op: &A, y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let mut ax = vec![0.0; op.rows()];
    op.apply(x, &mut ax);
    let fit: f64 = ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * fit + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// FISTA for a unit-norm matrix. Fails if `||scale * A||_2 > 1 + 1e-3`.
pub fn fista_l1(matrix: &MeasurementMatrix, y: &[f64], config: &SolverConfig) -> Result<Recovery> {
    check_unit_norm(matrix)?;
    fista(matrix, y, config)
}

fn check_unit_norm<A: LinearOperator + ?Sized>(op: &A) -> Result<()> {
    let norm = op.norm_estimate();
    if norm > 1.0 + NORM_SLACK {
        return Err(Error::Precondition(format!(
            "operator norm {norm} exceeds 1; rescale the matrix to unit norm first"
        )));
    }
    Ok(())
}

/// FISTA on any operator with `||A||_2 <= 1`: a gradient step of size
/// `step` on the quadratic term, soft-thresholding at `step * lambda`, and
/// Nesterov momentum, starting from `x = 0`.
pub fn fista<A: LinearOperator + ?Sized>(
    op: &A,
    y: &[f64],
    config: &SolverConfig,
) -> Result<Recovery> {
    config.validate()?;
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::Dimension(format!(
            "y has length {}, operator has {m} rows",
            y.len()
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(Recovery {
            x: vec![0.0; n],
            objective: 0.0,
            iterations: 0,
        });
    }
    let tau = config.step * config.lambda;
    let mut x = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut residual = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut momentum = 1.0f64;
    let mut last_obj = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..config.n_iter {
        iterations += 1;
        op.apply(&z, &mut residual);
        residual.iter_mut().zip(y).for_each(|(r, b)| *r -= b);
        op.apply_adjoint(&residual, &mut grad);
        std::mem::swap(&mut x, &mut x_prev);
        for ((xi, zi), gi) in x.iter_mut().zip(&z).zip(&grad) {
            *xi = shrink(zi - config.step * gi, tau);
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        for ((zi, xi), pi) in z.iter_mut().zip(&x).zip(&x_prev) {
            *zi = xi + beta * (xi - pi);
        }
        if config.tolerance > 0.0 {
            let obj = objective(op, y, &x, config.lambda);
            if (last_obj - obj).abs() <= config.tolerance * obj.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            last_obj = obj;
        }
    }
    let obj = objective(op, y, &x, config.lambda);
    Ok(Recovery {
        x,
        objective: obj,
        iterations,
    })
}

/// Recovered point or sparsified pressure `x[i, t_k]`, with the final
/// objective of every time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredData {
    grid: DetectorGrid,
    times: TimeGrid,
    values: Vec<f64>,
    pub objectives: Vec<f64>,
}

impl RecoveredData {
    pub fn new(
        grid: DetectorGrid,
        times: TimeGrid,
        values: Vec<f64>,
        objectives: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != grid.len() * times.len() || objectives.len() != times.len() {
            return Err(Error::Dimension(
                "recovered data does not match its grids".into(),
            ));
        }
        Ok(RecoveredData {
            grid,
            times,
            values,
            objectives,
        })
    }

    pub fn into_pressure(self) -> Result<crate::forward::PressureData> {
        crate::forward::PressureData::new(self.grid, self.times, self.values)
    }
}

impl DetectorTraces for RecoveredData {
    fn grid(&self) -> &DetectorGrid {
        &self.grid
    }

    fn times(&self) -> &TimeGrid {
        &self.times
    }

    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Solves one l1 problem per time slice of `cs`.
///
/// The measurements are brought to the matrix's current scale first, so
/// data taken before [`rescale_to_unit_norm`](crate::sensing::rescale_to_unit_norm)
/// are treated as `scale * A p`.
pub fn recover_slices(
    matrix: &MeasurementMatrix,
    cs: &CsData,
    grid: &DetectorGrid,
    config: &SolverConfig,
) -> Result<RecoveredData> {
    config.validate()?;
    if !matrix.meta().same_matrix(&cs.meta) {
        return Err(Error::Dimension(format!(
            "measurements were taken with {:?}, not with {:?}",
            cs.meta,
            matrix.meta()
        )));
    }
    if grid.len() != matrix.n() {
        return Err(Error::Dimension(format!(
            "detector grid has {} points, matrix has {} columns",
            grid.len(),
            matrix.n()
        )));
    }
    check_unit_norm(matrix)?;
    let ratio = matrix.scale() / cs.meta.scale;
    let nt = cs.times().len();
    let n = matrix.n();
    let solved: Vec<Recovery> = (0..nt)
        .into_par_iter()
        .map(|k| {
            let mut y = cs.slice(k);
            if ratio != 1.0 {
                y.iter_mut().for_each(|v| *v *= ratio);
            }
            fista(matrix, &y, config)
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * nt];
    let mut objectives = Vec::with_capacity(nt);
    for (k, rec) in solved.into_iter().enumerate() {
        for (i, v) in rec.x.into_iter().enumerate() {
            values[i * nt + k] = v;
        }
        objectives.push(rec.objective);
    }
    RecoveredData::new(*grid, *cs.times(), values, objectives)
}
