//! Temporal filters acting on each detector trace separately.
//!
//! * `ubp_filter`: `q = t^-1 d/dt (t^-1 p)`, the backprojection filter.
//! * `apply_t`: the sparsifying transform `T p = t^3 d/dt t^-1 d/dt t^-1 p`,
//!   which turns the N-shaped traces of uniform spheres into pairs of spikes.
//! * `tail_integral`: `Q(rho) = int_rho^t_max t^-3 q(t) dt`.
//!
//! Because `t^-3 T p = d/dt (ubp_filter p)`, the tail integral of `T p` is
//! `-ubp_filter(p)` for traces that vanish at late times.
//!
//! Both operators are built from `t^-1 d/dt (t^-1 p)` on the half steps
//! `t_k + dt/2`, a compact second-order difference. The filter averages
//! neighbouring half-step values and `T` differences them, so the
//! trapezoidal tail integral of `t^-3 T p` telescopes to `-q` exactly. A jump
//! in `p` spreads over two samples of `T p` instead of four. At `t = 0` both
//! outputs are `0`, and `p/t` there is extrapolated as an even function so
//! that `c1 t + c3 t^3` is annihilated right up to the first sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DetectorTraces, PressureData};
use crate::grids::{DetectorGrid, TimeGrid};
use crate::sensing::CsData;

/// Fewest time samples the difference stencils accept.
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterTag {
    UbpFilter,
    SparsifyingT,
    TailIntegral,
}

impl FilterTag {
    pub fn code(self) -> u8 {
        match self {
            FilterTag::UbpFilter => 0,
            FilterTag::SparsifyingT => 1,
            FilterTag::TailIntegral => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => FilterTag::UbpFilter,
            1 => FilterTag::SparsifyingT,
            2 => FilterTag::TailIntegral,
            _ => return None,
        })
    }
}

/// Detector traces after one of the temporal filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredData {
    pub tag: FilterTag,
    grid: DetectorGrid,
    times: TimeGrid,
    values: Vec<f64>,
}

impl FilteredData {
    pub fn new(
        tag: FilterTag,
        grid: DetectorGrid,
        times: TimeGrid,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != grid.len() * times.len() {
            return Err(Error::Dimension(format!(
                "filtered data has {} values, expected {}",
                values.len(),
                grid.len() * times.len()
            )));
        }
        Ok(FilteredData {
            tag,
            grid,
            times,
            values,
        })
    }
}

impl DetectorTraces for FilteredData {
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

fn check_samples(times: &TimeGrid) -> Result<()> {
    if times.len() < MIN_SAMPLES {
        return Err(Error::config(format!(
            "temporal filters need at least {MIN_SAMPLES} samples, got {}",
            times.len()
        )));
    }
    Ok(())
}

/// `w[k] = t^-1 d/dt (t^-1 p)` at the half step `t_k + dt/2`, from the
/// two neighbouring samples. One value fewer than `p`.
fn half_step_filter(p: &[f64], times: &TimeGrid) -> Vec<f64> {
    let dt = times.dt();
    let mut u: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == 0 { 0.0 } else { v / times.t(k) })
        .collect();
    // p/t at t = 0 is the limit of an even function a + b t^2.
    u[0] = (4.0 * u[1] - u[2]) / 3.0;
    u.windows(2)
        .enumerate()
        .map(|(k, w)| (w[1] - w[0]) / (dt * (k as f64 + 0.5) * dt))
        .collect()
}

/// `t^-1 d/dt (t^-1 p)` of a single trace: the mean of the two adjacent
/// half-step values, extrapolated linearly at the last sample.
pub fn ubp_filter_trace(p: &[f64], times: &TimeGrid) -> Vec<f64> {
    let w = half_step_filter(p, times);
    let n = p.len();
    let mut q = vec![0.0; n];
    for k in 1..n - 1 {
        q[k] = 0.5 * (w[k - 1] + w[k]);
    }
    q[n - 1] = 0.5 * (3.0 * w[n - 2] - w[n - 3]);
    q
}

/// `t^3 d/dt t^-1 d/dt t^-1 p` of a single trace: differences of the
/// half-step values, with a second-order one-sided stencil at the last
/// sample.
pub fn sparsify_trace(p: &[f64], times: &TimeGrid) -> Vec<f64> {
    let w = half_step_filter(p, times);
    let n = p.len();
    let dt = times.dt();
    let cube = |k: usize| times.t(k).powi(3);
    let mut out = vec![0.0; n];
    for k in 1..n - 1 {
        out[k] = cube(k) * (w[k] - w[k - 1]) / dt;
    }
    let d = |k: usize| w[k] - w[k - 1];
    out[n - 1] = cube(n - 1) * (2.0 * d(n - 2) - d(n - 3)) / dt;
    out
}

fn weighted(q: &[f64], ts: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(ts)
        .map(|(&v, &t)| if t == 0.0 { 0.0 } else { v / (t * t * t) })
        .collect()
}

/// `Q[k] = int_{t_k}^{t_max} t^-3 q(t) dt` by the trapezoidal rule, for
/// every sample `t_k`.
pub fn tail_integral_table(q: &[f64], times: &TimeGrid) -> Vec<f64> {
    let ts = times.samples();
    let f = weighted(q, &ts);
    let dt = times.dt();
    let n = q.len();
    let mut out = vec![0.0; n];
    for k in (0..n - 1).rev() {
        out[k] = out[k + 1] + 0.5 * dt * (f[k] + f[k + 1]);
    }
    out
}

/// `int_rho^{t_max} t^-3 q(t) dt` with `q` linearly interpolated at `rho`.
/// Zero for `rho >= t_max`.
pub fn tail_integral_trace(q: &[f64], times: &TimeGrid, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!(
            "tail integral needs rho >= 0, got {rho}"
        )));
    }
    if rho >= times.t_max() {
        return Ok(0.0);
    }
    let dt = times.dt();
    let k = ((rho / dt).floor() as usize).min(times.len() - 2);
    let t_next = times.t(k + 1);
    let frac = (rho - times.t(k)) / dt;
    let q_rho = q[k] + frac * (q[k + 1] - q[k]);
    let f_rho = if rho == 0.0 {
        0.0
    } else {
        q_rho / (rho * rho * rho)
    };
    let f_next = q[k + 1] / (t_next * t_next * t_next);
    let table = tail_integral_table(q, times);
    Ok(table[k + 1] + 0.5 * (t_next - rho) * (f_rho + f_next))
}

fn map_traces(
    values: &[f64],
    times: &TimeGrid,
    f: impl Fn(&[f64], &TimeGrid) -> Vec<f64>,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for trace in values.chunks_exact(times.len()) {
        out.extend(f(trace, times));
    }
    out
}

/// Sparsifying transform of detector traces.
pub fn apply_t(data: &PressureData) -> Result<FilteredData> {
    check_samples(data.times())?;
    let values = map_traces(data.values(), data.times(), sparsify_trace);
    FilteredData::new(FilterTag::SparsifyingT, *data.grid(), *data.times(), values)
}

/// Sparsifying transform of compressed measurements, `T y = A (T p)`.
pub fn apply_t_measurements(data: &CsData) -> Result<CsData> {
    check_samples(data.times())?;
    let values = map_traces(data.values(), data.times(), sparsify_trace);
    data.with_values(values)
}

pub fn ubp_filter(data: &PressureData) -> Result<FilteredData> {
    check_samples(data.times())?;
    let values = map_traces(data.values(), data.times(), ubp_filter_trace);
    FilteredData::new(FilterTag::UbpFilter, *data.grid(), *data.times(), values)
}

/// Tail integral of every trace at a common `rho`.
pub fn tail_integral(filtered: &impl DetectorTraces, rho: f64) -> Result<Vec<f64>> {
    (0..filtered.grid().len())
        .map(|i| tail_integral_trace(filtered.trace(i), filtered.times(), rho))
        .collect()
}

/// Tail integral tables for every trace, tagged `TailIntegral`.
pub fn tail_integral_data(filtered: &impl DetectorTraces) -> Result<FilteredData> {
    let times = *filtered.times();
    let values = map_traces(filtered.values(), &times, tail_integral_table);
    FilteredData::new(FilterTag::TailIntegral, *filtered.grid(), times, values)
}
