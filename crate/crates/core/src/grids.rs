//! Sampling geometry shared by every stage: the detector plane `z = 0`, the
//! time axis and the reconstruction volume.
//!
//! All lengths and times are in sound-speed-normalized units (`c = 1`), so a
//! time sample `t` is also the travel distance `ct`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled closed interval, endpoints included.
///
/// An axis with a single sample sits at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    min: f64,
    max: f64,
    count: usize,
}

impl Axis {
    /// Nondegenerate axis: `min < max`, `count >= 1`.
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::config(format!(
                "axis extent [{min}, {max}] is not finite"
            )));
        }
        if !(min < max) {
            return Err(Error::config(format!(
                "degenerate axis extent [{min}, {max}]"
            )));
        }
        if count == 0 {
            return Err(Error::config("axis needs at least one sample"));
        }
        Ok(Axis { min, max, count })
    }

    /// Like [`Axis::new`], but also accepts the single point `min == max`
    /// when `count == 1`.
    pub fn new_or_point(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 1 && min == max && min.is_finite() {
            return Ok(Axis { min, max, count });
        }
        Axis::new(min, max, count)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Distance between neighbouring samples, `0` for a single-sample axis.
    pub fn spacing(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        if self.count < 2 {
            return self.min;
        }
        if i + 1 == self.count {
            return self.max;
        }
        // Weighted form: mirrored indices on a symmetric axis give exactly
        // opposite coordinates.
        let last = (self.count - 1) as f64;
        (self.min * (last - i as f64) + self.max * i as f64) / last
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.coord(i))
    }
}

/// Detector positions `r_S[i] = (x, y, 0)` on a Cartesian grid, enumerated
/// row-major with `x` varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorGrid {
    x: Axis,
    y: Axis,
}

impl DetectorGrid {
    pub fn new(x: Axis, y: Axis) -> Self {
        DetectorGrid { x, y }
    }

    pub fn x(&self) -> &Axis {
        &self.x
    }

    pub fn y(&self) -> &Axis {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    /// Number of detectors `n = n_x * n_y`.
    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.x.len() + ix
    }

    pub fn unravel(&self, i: usize) -> (usize, usize) {
        (i % self.x.len(), i / self.x.len())
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        let (ix, iy) = self.unravel(i);
        [self.x.coord(ix), self.y.coord(iy), 0.0]
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.position(i))
    }

    /// Uniform quadrature weight `dx * dy` of the surface integral. A
    /// single-sample axis contributes a unit factor.
    pub fn cell_area(&self) -> f64 {
        let side = |a: &Axis| if a.len() > 1 { a.spacing() } else { 1.0 };
        side(&self.x) * side(&self.y)
    }

    /// Keeps every `step_x`-th column and `step_y`-th row, starting at the
    /// minimum corner.
    pub fn subsample(&self, step_x: usize, step_y: usize) -> Result<DetectorGrid> {
        if step_x == 0 || step_y == 0 {
            return Err(Error::config("subsampling step must be positive"));
        }
        let sub = |a: &Axis, step: usize| -> Result<Axis> {
            let count = (a.len() - 1) / step + 1;
            if count == 1 {
                return Axis::new(a.min(), a.max(), 1);
            }
            Axis::new(a.min(), a.coord((count - 1) * step), count)
        };
        Ok(DetectorGrid::new(
            sub(&self.x, step_x)?,
            sub(&self.y, step_y)?,
        ))
    }
}

/// Uniform time samples `t_k = k * dt` on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    n_t: usize,
}

impl TimeGrid {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.n_t - 1) as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k + 1 == self.n_t {
            self.t_max
        } else {
            self.t_max * (k as f64 / (self.n_t - 1) as f64)
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.n_t).map(|k| self.t(k)).collect()
    }
}

/// Reconstruction points `r[k] = (x, y, z)` in the upper half space,
/// enumerated with `x` fastest, then `y`, then `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconGrid {
    x: Axis,
    y: Axis,
    z: Axis,
}

impl ReconGrid {
    pub fn x(&self) -> &Axis {
        &self.x
    }

    pub fn y(&self) -> &Axis {
        &self.y
    }

    pub fn z(&self) -> &Axis {
        &self.z
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.x.len(), self.y.len(), self.z.len()]
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.y.len() + iy) * self.x.len() + ix
    }

    pub fn unravel(&self, k: usize) -> (usize, usize, usize) {
        let nx = self.x.len();
        let ny = self.y.len();
        (k % nx, (k / nx) % ny, k / (nx * ny))
    }

    pub fn position(&self, k: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.unravel(k);
        [self.x.coord(ix), self.y.coord(iy), self.z.coord(iz)]
    }

    /// Same grid moved by `offset`; the shifted grid must still lie in `z >= 0`.
    pub fn translated(&self, offset: [f64; 3]) -> Result<ReconGrid> {
        let shift = |a: &Axis, d: f64| Axis::new_or_point(a.min() + d, a.max() + d, a.len());
        build_recon_grid(
            shift(&self.x, offset[0])?,
            shift(&self.y, offset[1])?,
            shift(&self.z, offset[2])?,
        )
    }
}

pub fn build_detector_grid(
    x_extent: (f64, f64),
    y_extent: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<DetectorGrid> {
    Ok(DetectorGrid::new(
        Axis::new(x_extent.0, x_extent.1, nx)?,
        Axis::new(y_extent.0, y_extent.1, ny)?,
    ))
}

pub fn build_time_grid(t_max: f64, n_t: usize) -> Result<TimeGrid> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::config(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if n_t < 3 {
        return Err(Error::config(format!(
            "need at least 3 time samples, got {n_t}"
        )));
    }
    Ok(TimeGrid { t_max, n_t })
}

/// Builds a reconstruction grid. Axes with a single sample may be a point
/// (a slice has `n_y = 1`), and the whole grid must satisfy `z >= 0`.
pub fn build_recon_grid(x: Axis, y: Axis, z: Axis) -> Result<ReconGrid> {
    if z.min() < 0.0 {
        return Err(Error::config(format!(
            "reconstruction grid must lie in z >= 0, got z_min = {}",
            z.min()
        )));
    }
    Ok(ReconGrid { x, y, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_detector_grid_has_4096_points() {
        let g = build_detector_grid((-3.0, 3.0), (-3.0, 3.0), 64, 64).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.position(0), [-3.0, -3.0, 0.0]);
        assert_eq!(g.position(4095), [3.0, 3.0, 0.0]);
        // x runs fastest
        assert_eq!(g.position(1)[1], -3.0);
        assert!(g.position(1)[0] > -3.0);
    }

    #[test]
    fn single_point_grid_sits_at_minimum() {
        let g = build_detector_grid((0.0, 1.0), (0.0, 1.0), 1, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.position(0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn three_by_three_grid() {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 3, 3).unwrap();
        let xs: Vec<f64> = g.x().coords().collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.position(4), [0.0, 0.0, 0.0]);
        assert_eq!(g.position(8), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn degenerate_extent_is_rejected() {
        assert!(matches!(
            build_detector_grid((1.0, 1.0), (0.0, 1.0), 4, 4),
            Err(Error::Config(_))
        ));
        assert!(build_detector_grid((0.0, 1.0), (0.0, 1.0), 0, 4).is_err());
        assert!(build_detector_grid((0.0, f64::NAN), (0.0, 1.0), 2, 4).is_err());
    }

    #[test]
    fn time_grids() {
        let t = build_time_grid(6.0, 243).unwrap();
        assert_eq!(t.dt(), 6.0 / 242.0);
        assert_eq!(t.t(0), 0.0);
        assert_eq!(t.t(242), 6.0);
        assert_eq!(
            build_time_grid(1.0, 3).unwrap().samples(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            build_time_grid(2.0, 5).unwrap().samples(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert!(build_time_grid(0.0, 10).is_err());
        assert!(build_time_grid(-1.0, 10).is_err());
        assert!(build_time_grid(1.0, 2).is_err());
    }

    #[test]
    fn full_size_recon_slice() {
        let g = build_recon_grid(
            Axis::new(-3.0, 3.0, 241).unwrap(),
            Axis::new_or_point(0.0, 0.0, 1).unwrap(),
            Axis::new(0.0, 1.0, 41).unwrap(),
        )
        .unwrap();
        assert_eq!(g.len(), 9881);
        assert!((0..g.len()).all(|k| g.position(k)[2] >= 0.0));
    }

    #[test]
    fn recon_grid_rejects_lower_half_space() {
        let r = build_recon_grid(
            Axis::new(-1.0, 1.0, 3).unwrap(),
            Axis::new(-1.0, 1.0, 3).unwrap(),
            Axis::new(-0.5, 1.0, 3).unwrap(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn cube_corners() {
        let g = build_recon_grid(
            Axis::new(-1.0, 1.0, 2).unwrap(),
            Axis::new(-1.0, 1.0, 2).unwrap(),
            Axis::new(0.0, 1.0, 2).unwrap(),
        )
        .unwrap();
        let mut pts: Vec<[f64; 3]> = (0..g.len()).map(|k| g.position(k)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        assert_eq!(pts.len(), 8);
        assert!(pts.iter().all(|p| p[0].abs() == 1.0 && p[1].abs() == 1.0));
    }

    #[test]
    fn subsample_doubles_spacing() {
        let g = build_detector_grid((-3.0, 3.0), (-3.0, 3.0), 65, 65).unwrap();
        let s = g.subsample(2, 2).unwrap();
        assert_eq!(s.nx(), 33);
        assert_eq!(s.x().max(), 3.0);
        assert!((s.x().spacing() - 2.0 * g.x().spacing()).abs() < 1e-15);
        assert!((s.cell_area() - 4.0 * g.cell_area()).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn detector_index_round_trip(nx in 1usize..40, ny in 1usize..40, lo in -5.0f64..0.0, w in 0.1f64..5.0) {
                let g = build_detector_grid((lo, lo + w), (lo, lo + 2.0 * w), nx, ny).unwrap();
                for i in 0..g.len() {
                    let (ix, iy) = g.unravel(i);
                    prop_assert_eq!(g.index(ix, iy), i);
                    prop_assert_eq!(g.position(i)[2], 0.0);
                }
            }

            #[test]
            fn recon_index_round_trip(nx in 1usize..12, ny in 1usize..12, nz in 1usize..12) {
                let g = build_recon_grid(
                    Axis::new(-1.0, 1.0, nx).unwrap(),
                    Axis::new(-1.0, 1.0, ny).unwrap(),
                    Axis::new(0.0, 1.0, nz).unwrap(),
                ).unwrap();
                for k in 0..g.len() {
                    let (ix, iy, iz) = g.unravel(k);
                    prop_assert_eq!(g.index(ix, iy, iz), k);
                }
            }

            #[test]
            fn spacing_is_uniform(n in 2usize..200, lo in -10.0f64..10.0, w in 0.01f64..20.0) {
                let a = Axis::new(lo, lo + w, n).unwrap();
                let h = w / (n - 1) as f64;
                for i in 1..n {
                    let d = a.coord(i) - a.coord(i - 1);
                    prop_assert!((d - h).abs() <= 1e-12 * (1.0 + lo.abs() + w));
                }
            }
        }
    }
}
