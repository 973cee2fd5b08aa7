//! Analytic forward model for uniformly absorbing spheres.
//!
//! A ball of radius `R` and amplitude `A` centred at `c` produces, at an
//! exterior point at distance `rho` from `c`, the N-shaped trace
//!
//! ```text
//! p(t) = A (rho - t) / (2 rho)   for |rho - t| <= R,   0 otherwise.
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{DetectorGrid, ReconGrid, TimeGrid};
use crate::recon::ReconImage;

/// One uniformly absorbing ball in the upper half space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

impl Sphere {
    pub fn new(center: [f64; 3], radius: f64, amplitude: f64) -> Result<Self> {
        let s = Sphere {
            center,
            radius,
            amplitude,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|c| c.is_finite())
            && self.radius.is_finite()
            && self.amplitude.is_finite();
        if !finite {
            return Err(Error::config("sphere parameters must be finite"));
        }
        if self.radius <= 0.0 {
            return Err(Error::config(format!(
                "sphere radius must be positive, got {}",
                self.radius
            )));
        }
        if self.center[2] <= self.radius {
            return Err(Error::config(format!(
                "sphere must lie in the open upper half space (center z {} <= radius {})",
                self.center[2], self.radius
            )));
        }
        Ok(())
    }

    pub fn distance(&self, point: [f64; 3]) -> f64 {
        distance(self.center, point)
    }

    pub fn contains(&self, point: [f64; 3]) -> bool {
        self.distance(point) <= self.radius
    }

    /// Pressure at an exterior `point` and time `t`.
    pub fn pressure(&self, point: [f64; 3], t: f64) -> Result<f64> {
        let rho = self.distance(point);
        if rho <= self.radius {
            return Err(Error::Domain(format!(
                "observation point at distance {rho} is not outside the sphere of radius {}",
                self.radius
            )));
        }
        Ok(n_wave(self.amplitude, self.radius, rho, t))
    }
}

#[inline]
fn n_wave(amplitude: f64, radius: f64, rho: f64, t: f64) -> f64 {
    let lag = rho - t;
    if lag.abs() <= radius {
        amplitude * lag / (2.0 * rho)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// See [`Sphere::pressure`].
pub fn sphere_pressure(sphere: &Sphere, observation_point: [f64; 3], t: f64) -> Result<f64> {
    sphere.pressure(observation_point, t)
}

/// Superposition of spheres; the initial pressure `p0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpherePhantom {
    pub spheres: Vec<Sphere>,
}

impl SpherePhantom {
    pub fn new(spheres: Vec<Sphere>) -> Result<Self> {
        let p = SpherePhantom { spheres };
        p.validate()?;
        Ok(p)
    }

    /// Two balls centred in the plane `y = 0`, the default test object.
    pub fn two_spheres() -> Self {
        SpherePhantom {
            spheres: vec![
                Sphere {
                    center: [-0.8, 0.0, 0.55],
                    radius: 0.4,
                    amplitude: 1.0,
                },
                Sphere {
                    center: [0.75, 0.0, 0.4],
                    radius: 0.3,
                    amplitude: 1.0,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spheres.iter().try_for_each(Sphere::validate)
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SpherePhantom {
            spheres: self
                .spheres
                .iter()
                .map(|s| Sphere {
                    amplitude: s.amplitude * factor,
                    ..*s
                })
                .collect(),
        }
    }

    pub fn translated(&self, offset: [f64; 3]) -> Self {
        SpherePhantom {
            spheres: self
                .spheres
                .iter()
                .map(|s| Sphere {
                    center: [
                        s.center[0] + offset[0],
                        s.center[1] + offset[1],
                        s.center[2] + offset[2],
                    ],
                    ..*s
                })
                .collect(),
        }
    }

    /// Value of `p0` at `point`.
    pub fn source(&self, point: [f64; 3]) -> f64 {
        self.spheres
            .iter()
            .filter(|s| s.contains(point))
            .map(|s| s.amplitude)
            .sum()
    }
}

/// Read access to a set of per-detector time traces stored detector-major
/// (`values[i * n_t + k]`).
pub trait DetectorTraces: Sync {
    fn grid(&self) -> &DetectorGrid;
    fn times(&self) -> &TimeGrid;
    fn values(&self) -> &[f64];

    fn trace(&self, i: usize) -> &[f64] {
        let nt = self.times().len();
        &self.values()[i * nt..(i + 1) * nt]
    }
}

/// Semi-discrete pressure `p[i, t_k]` on a detector grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureData {
    grid: DetectorGrid,
    times: TimeGrid,
    values: Vec<f64>,
}

impl PressureData {
    pub fn new(grid: DetectorGrid, times: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * times.len();
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "pressure data has {} values, expected {} x {} = {expected}",
                values.len(),
                grid.len(),
                times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "pressure data contains non-finite values".into(),
            ));
        }
        Ok(PressureData {
            grid,
            times,
            values,
        })
    }

    pub fn zeros(grid: DetectorGrid, times: TimeGrid) -> Self {
        PressureData {
            values: vec![0.0; grid.len() * times.len()],
            grid,
            times,
        }
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.times.len() + k]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Detector-subsampled copy; see [`DetectorGrid::subsample`].
    pub fn subsample(&self, step_x: usize, step_y: usize) -> Result<PressureData> {
        let grid = self.grid.subsample(step_x, step_y)?;
        let nt = self.times.len();
        let mut values = Vec::with_capacity(grid.len() * nt);
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let src = self.grid.index(ix * step_x, iy * step_y);
                values.extend_from_slice(self.trace(src));
            }
        }
        PressureData::new(grid, self.times, values)
    }
}

impl DetectorTraces for PressureData {
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

/// Samples the phantom's pressure at every detector and time.
pub fn phantom_pressure(
    phantom: &SpherePhantom,
    grid: &DetectorGrid,
    times: &TimeGrid,
) -> Result<PressureData> {
    phantom.validate()?;
    let nt = times.len();
    let ts = times.samples();
    let mut values = vec![0.0; grid.len() * nt];
    values
        .par_chunks_mut(nt)
        .enumerate()
        .for_each(|(i, trace)| {
            let r_s = grid.position(i);
            for s in &phantom.spheres {
                let rho = s.distance(r_s);
                for (p, &t) in trace.iter_mut().zip(&ts) {
                    *p += n_wave(s.amplitude, s.radius, rho, t);
                }
            }
        });
    PressureData::new(*grid, *times, values)
}

/// Ground-truth `p0` sampled on a reconstruction grid.
pub fn phantom_source_slice(phantom: &SpherePhantom, grid: &ReconGrid) -> ReconImage {
    let values = (0..grid.len())
        .map(|k| phantom.source(grid.position(k)))
        .collect();
    ReconImage::new(*grid, values).expect("phantom source has grid size")
}
