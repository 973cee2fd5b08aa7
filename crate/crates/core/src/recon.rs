//! Universal backprojection in planar geometry,
//!
//! ```text
//! p0(r) = -z/pi  sum_i  q[i, |r - r_S[i]|] w_i ,
//! ```
//!
//! applied either to the filtered pressure `q = t^-1 d/dt t^-1 p` or, for
//! sparsified data, to `-int_rho^t_max t^-3 (T p)(t) dt`.
//!
//! The leading minus matches the pressure convention of [`crate::forward`],
//! where the N-wave is positive before the centre arrival: a positive source
//! reconstructs positive.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{distance, DetectorTraces, PressureData};
use crate::grids::{DetectorGrid, ReconGrid, TimeGrid};
use crate::sparsify::{tail_integral_table, ubp_filter};

/// Scalar field on a reconstruction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconImage {
    grid: ReconGrid,
    values: Vec<f64>,
}

impl ReconImage {
    pub fn new(grid: ReconGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "image has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("image contains non-finite values".into()));
        }
        Ok(ReconImage { grid, values })
    }

    pub fn grid(&self) -> &ReconGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            })
            .0
    }

    /// Maximum-intensity projection along `axis` (0 = x, 1 = y, 2 = z).
    /// Returns `(width, height, values)` with the remaining axes in their
    /// natural order, the first one running fastest.
    pub fn max_projection(&self, axis: usize) -> (usize, usize, Vec<f64>) {
        let [nx, ny, nz] = self.grid.shape();
        let (w, h) = match axis {
            0 => (ny, nz),
            1 => (nx, nz),
            _ => (nx, ny),
        };
        let mut out = vec![f64::NEG_INFINITY; w * h];
        for k in 0..self.values.len() {
            let (ix, iy, iz) = self.grid.unravel(k);
            let slot = match axis {
                0 => iz * ny + iy,
                1 => iz * nx + ix,
                _ => iy * nx + ix,
            };
            out[slot] = out[slot].max(self.values[k]);
        }
        (w, h, out)
    }
}

#[inline]
fn interpolate(table: &[f64], inv_dt: f64, rho: f64) -> f64 {
    let s = rho * inv_dt;
    let last = table.len() - 1;
    if s > last as f64 {
        return 0.0;
    }
    let i0 = s as usize;
    if i0 >= last {
        return table[last];
    }
    let frac = s - i0 as f64;
    table[i0] + frac * (table[i0 + 1] - table[i0])
}

/// `sign * z/pi * sum_i table[i](|r - r_S[i]|) * w` for every grid point.
fn backproject(
    table: &[f64],
    detectors: &DetectorGrid,
    times: &TimeGrid,
    recon: &ReconGrid,
    sign: f64,
) -> Result<ReconImage> {
    if detectors.is_empty() || recon.is_empty() {
        return Err(Error::config("backprojection needs nonempty grids"));
    }
    let nt = times.len();
    let positions: Vec<[f64; 3]> = detectors.positions().collect();
    let weight = detectors.cell_area();
    let inv_dt = 1.0 / times.dt();
    let values: Vec<f64> = (0..recon.len())
        .into_par_iter()
        .map(|k| {
            let r = recon.position(k);
            let sum: f64 = positions
                .iter()
                .enumerate()
                .map(|(i, &rs)| interpolate(&table[i * nt..(i + 1) * nt], inv_dt, distance(r, rs)))
                .sum();
            sign * r[2] / PI * weight * sum
        })
        .collect();
    ReconImage::new(*recon, values)
}

/// Backprojection of point data through the filter `t^-1 d/dt t^-1`.
pub fn ubp_reconstruct(pressure: &PressureData, recon_grid: &ReconGrid) -> Result<ReconImage> {
    let q = ubp_filter(pressure)?;
    backproject(
        q.values(),
        pressure.grid(),
        pressure.times(),
        recon_grid,
        -1.0,
    )
}

/// Backprojection from (recovered) sparsified data `T p`.
///
/// Each trace is turned into its tail integral on the time grid, which is
/// then interpolated linearly at `|r - r_S|`. Since the tail integral of
/// `T p` is `-q`, the prefactor here is `+z/pi`.
pub fn modified_ubp(
    sparsified: &impl DetectorTraces,
    recon_grid: &ReconGrid,
) -> Result<ReconImage> {
    let times = *sparsified.times();
    let n = sparsified.grid().len();
    let tails: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| tail_integral_table(sparsified.trace(i), &times))
        .collect();
    let table = tails.concat();
    backproject(&table, sparsified.grid(), &times, recon_grid, 1.0)
}

/// Backprojection of point data on a coarser Cartesian grid. The quadrature
/// weight follows the coarse spacing, so this is [`ubp_reconstruct`] on that
/// grid.
pub fn undersampled_ubp(pressure: &PressureData, recon_grid: &ReconGrid) -> Result<ReconImage> {
    ubp_reconstruct(pressure, recon_grid)
}
