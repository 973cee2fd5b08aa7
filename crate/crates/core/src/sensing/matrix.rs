use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hadamard::hadamard_in_place;
use super::operator::{power_iteration, DenseMatrix, LinearOperator};
use crate::error::{Error, Result};
use crate::forward::{DetectorTraces, PressureData};
use crate::grids::TimeGrid;

/// Stream offset separating measurement noise from the matrix entries drawn
/// with the same seed.
const NOISE_STREAM: u64 = 0x6e6f_6973_655f_7631;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Bernoulli,
    HadamardSubsampled,
    Expander,
    IdentitySubset,
}

impl MatrixKind {
    pub fn code(self) -> u8 {
        match self {
            MatrixKind::Bernoulli => 0,
            MatrixKind::HadamardSubsampled => 1,
            MatrixKind::Expander => 2,
            MatrixKind::IdentitySubset => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => MatrixKind::Bernoulli,
            1 => MatrixKind::HadamardSubsampled,
            2 => MatrixKind::Expander,
            3 => MatrixKind::IdentitySubset,
            _ => return None,
        })
    }
}

/// Storage of the unscaled entries.
#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    /// Row-major `+1/-1` entries.
    Signs(Vec<i8>),
    /// Selected rows of `H_n` (orthonormal) or of the identity.
    Rows(Vec<u32>),
    /// `d` distinct row indices per column, column after column.
    Columns(Vec<u32>),
}

/// Descriptive fields shared by a matrix and the data measured with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
    /// Ones per column; `0` unless the kind is `Expander`.
    pub d: usize,
    pub seed: u64,
    pub scale: f64,
}

impl MatrixMeta {
    /// Same matrix up to the scale factor.
    pub fn same_matrix(&self, other: &MatrixMeta) -> bool {
        self.kind == other.kind
            && self.m == other.m
            && self.n == other.n
            && self.d == other.d
            && self.seed == other.seed
    }
}

/// A binary random `m x n` measurement matrix `scale * A`.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    meta: MatrixMeta,
    entries: Entries,
    /// Unscaled spectral norm, filled on first use.
    sigma: OnceLock<f64>,
}

impl PartialEq for MeasurementMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta && self.entries == other.entries
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::config("measurement matrix needs m >= 1 and n >= 1"));
    }
    if m > n {
        return Err(Error::config(format!(
            "compressed acquisition needs m <= n, got m = {m}, n = {n}"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::config("n exceeds the u32 index range"));
    }
    Ok(())
}

/// Picks `k` distinct entries of `pool` by a partial Fisher-Yates shuffle,
/// leaving them in `pool[..k]`.
fn partial_shuffle(pool: &mut [u32], k: usize, rng: &mut ChaCha8Rng) {
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
}

/// Dense `+-1` matrix with i.i.d. fair signs.
pub fn build_bernoulli(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(m, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs = (0..m * n)
        .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
        .collect();
    Ok(MeasurementMatrix::from_parts(
        MatrixMeta {
            kind: MatrixKind::Bernoulli,
            m,
            n,
            d: 0,
            seed,
            scale: 1.0,
        },
        Entries::Signs(signs),
    ))
}

/// `m` rows of the orthonormal `H_n` drawn uniformly without replacement.
pub fn build_subsampled_hadamard(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(m, n)?;
    if !n.is_power_of_two() {
        return Err(Error::config(format!(
            "Hadamard size must be a power of two, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (0..n as u32).collect();
    partial_shuffle(&mut pool, m, &mut rng);
    let mut rows = pool[..m].to_vec();
    rows.sort_unstable();
    Ok(MeasurementMatrix::from_parts(
        MatrixMeta {
            kind: MatrixKind::HadamardSubsampled,
            m,
            n,
            d: 0,
            seed,
            scale: 1.0,
        },
        Entries::Rows(rows),
    ))
}

/// Adjacency matrix of a random left `d`-regular bipartite graph: each
/// column independently gets `d` distinct rows, uniformly.
pub fn build_expander(m: usize, n: usize, d: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(m, n)?;
    if d == 0 || d > m {
        return Err(Error::config(format!(
            "expander needs 1 <= d <= m, got d = {d}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (0..m as u32).collect();
    let mut columns = Vec::with_capacity(n * d);
    for _ in 0..n {
        partial_shuffle(&mut pool, d, &mut rng);
        let start = columns.len();
        columns.extend_from_slice(&pool[..d]);
        columns[start..].sort_unstable();
    }
    Ok(MeasurementMatrix::from_parts(
        MatrixMeta {
            kind: MatrixKind::Expander,
            m,
            n,
            d,
            seed,
            scale: 1.0,
        },
        Entries::Columns(columns),
    ))
}

/// Rows `rows` of the `n x n` identity (point sampling).
pub fn build_identity_subset(rows: Vec<u32>, n: usize) -> Result<MeasurementMatrix> {
    check_dims(rows.len(), n)?;
    if rows.iter().any(|&r| r as usize >= n) {
        return Err(Error::config("identity row index out of range"));
    }
    Ok(MeasurementMatrix::from_parts(
        MatrixMeta {
            kind: MatrixKind::IdentitySubset,
            m: rows.len(),
            n,
            d: 0,
            seed: 0,
            scale: 1.0,
        },
        Entries::Rows(rows),
    ))
}

pub fn build_identity(n: usize) -> Result<MeasurementMatrix> {
    build_identity_subset((0..n as u32).collect(), n)
}

impl MeasurementMatrix {
    pub(crate) fn from_parts(meta: MatrixMeta, entries: Entries) -> Self {
        MeasurementMatrix {
            meta,
            entries,
            sigma: OnceLock::new(),
        }
    }

    /// Reassembles a matrix from stored parts, checking every invariant.
    pub fn from_stored(meta: MatrixMeta, entries: Entries) -> Result<Self> {
        let MatrixMeta { kind, m, n, d, .. } = meta;
        if m == 0 || n == 0 || m.max(n) > u32::MAX as usize {
            return Err(Error::config("stored matrix has invalid dimensions"));
        }
        if !(meta.scale.is_finite() && meta.scale > 0.0) {
            return Err(Error::config("matrix scale must be positive"));
        }
        let ok = match (&kind, &entries) {
            (MatrixKind::Bernoulli, Entries::Signs(s)) => {
                s.len() == m * n && s.iter().all(|&v| v == 1 || v == -1)
            }
            (MatrixKind::HadamardSubsampled, Entries::Rows(r)) => {
                let mut sorted = r.clone();
                sorted.sort_unstable();
                sorted.dedup();
                n.is_power_of_two()
                    && r.len() == m
                    && sorted.len() == m
                    && r.iter().all(|&i| (i as usize) < n)
            }
            (MatrixKind::IdentitySubset, Entries::Rows(r)) => {
                r.len() == m && r.iter().all(|&i| (i as usize) < n)
            }
            (MatrixKind::Expander, Entries::Columns(c)) => {
                d >= 1
                    && d <= m
                    && c.len() == n * d
                    && c.chunks_exact(d).all(|col| {
                        let mut s = col.to_vec();
                        s.sort_unstable();
                        s.dedup();
                        s.len() == d && s.iter().all(|&i| (i as usize) < m)
                    })
            }
            _ => false,
        };
        if !ok {
            return Err(Error::config(format!(
                "entries do not form a valid {kind:?} matrix"
            )));
        }
        Ok(MeasurementMatrix::from_parts(meta, entries))
    }

    pub fn meta(&self) -> &MatrixMeta {
        &self.meta
    }

    pub fn kind(&self) -> MatrixKind {
        self.meta.kind
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn d(&self) -> usize {
        self.meta.d
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    pub fn scale(&self) -> f64 {
        self.meta.scale
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    /// Row indices of the ones in column `i` (expander only).
    pub fn column_support(&self, i: usize) -> Option<&[u32]> {
        match &self.entries {
            Entries::Columns(c) => Some(&c[i * self.meta.d..(i + 1) * self.meta.d]),
            _ => None,
        }
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::config(format!(
                "matrix scale must be positive, got {scale}"
            )));
        }
        let mut out = self.clone();
        out.meta.scale = scale;
        Ok(out)
    }

    /// Spectral norm of the unscaled matrix.
    pub fn unscaled_norm(&self) -> f64 {
        *self.sigma.get_or_init(|| {
            let unit = Unscaled(self);
            power_iteration(&unit, self.meta.seed ^ 0x9e37_79b9_7f4a_7c15, 1e-6, 1000)
                .unwrap_or(0.0)
        })
    }

    /// Dense copy of `scale * A`.
    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n) = (self.meta.m, self.meta.n);
        let mut data = vec![0.0; m * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; m];
        for i in 0..n {
            e[i] = 1.0;
            self.apply(&e, &mut col);
            e[i] = 0.0;
            for j in 0..m {
                data[j * n + i] = col[j];
            }
        }
        DenseMatrix::new(m, n, data).expect("dense size")
    }

    fn apply_unscaled(&self, x: &[f64], y: &mut [f64]) {
        let n = self.meta.n;
        match &self.entries {
            Entries::Signs(s) => {
                for (j, out) in y.iter_mut().enumerate() {
                    let row = &s[j * n..(j + 1) * n];
                    *out = row.iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
                }
            }
            Entries::Rows(rows) => match self.meta.kind {
                MatrixKind::HadamardSubsampled => {
                    let mut buf = x.to_vec();
                    hadamard_in_place(&mut buf).expect("power-of-two size");
                    for (out, &r) in y.iter_mut().zip(rows) {
                        *out = buf[r as usize];
                    }
                }
                _ => {
                    for (out, &r) in y.iter_mut().zip(rows) {
                        *out = x[r as usize];
                    }
                }
            },
            Entries::Columns(cols) => {
                y.iter_mut().for_each(|v| *v = 0.0);
                let d = self.meta.d;
                for (support, &xi) in cols.chunks_exact(d).zip(x) {
                    if xi != 0.0 {
                        for &r in support {
                            y[r as usize] += xi;
                        }
                    }
                }
            }
        }
    }

    fn apply_adjoint_unscaled(&self, y: &[f64], x: &mut [f64]) {
        let n = self.meta.n;
        match &self.entries {
            Entries::Signs(s) => {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (j, &yj) in y.iter().enumerate() {
                    let row = &s[j * n..(j + 1) * n];
                    for (out, &a) in x.iter_mut().zip(row) {
                        *out += a as f64 * yj;
                    }
                }
            }
            Entries::Rows(rows) => {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&yj, &r) in y.iter().zip(rows) {
                    x[r as usize] += yj;
                }
                if self.meta.kind == MatrixKind::HadamardSubsampled {
                    hadamard_in_place(x).expect("power-of-two size");
                }
            }
            Entries::Columns(cols) => {
                let d = self.meta.d;
                for (support, out) in cols.chunks_exact(d).zip(x.iter_mut()) {
                    *out = support.iter().map(|&r| y[r as usize]).sum();
                }
            }
        }
    }
}

struct Unscaled<'a>(&'a MeasurementMatrix);

impl LinearOperator for Unscaled<'_> {
    fn rows(&self) -> usize {
        self.0.meta.m
    }

    fn cols(&self) -> usize {
        self.0.meta.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_unscaled(x, y)
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply_adjoint_unscaled(y, x)
    }
}

impl LinearOperator for MeasurementMatrix {
    fn rows(&self) -> usize {
        self.meta.m
    }

    fn cols(&self) -> usize {
        self.meta.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_unscaled(x, y);
        if self.meta.scale != 1.0 {
            y.iter_mut().for_each(|v| *v *= self.meta.scale);
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.apply_adjoint_unscaled(y, x);
        if self.meta.scale != 1.0 {
            x.iter_mut().for_each(|v| *v *= self.meta.scale);
        }
    }

    fn norm_estimate(&self) -> f64 {
        self.meta.scale * self.unscaled_norm()
    }
}

/// Sets `scale = 1 / sigma_max(A)` so that the scaled matrix has unit
/// spectral norm.
pub fn rescale_to_unit_norm(matrix: &MeasurementMatrix) -> Result<MeasurementMatrix> {
    let sigma = matrix.unscaled_norm();
    if !(sigma > 0.0) {
        return Err(Error::Numeric("cannot rescale a zero matrix".into()));
    }
    matrix.with_scale(1.0 / sigma)
}

/// Factor `1 / ||A||_2` for an arbitrary operator.
pub fn unit_norm_scale<A: LinearOperator + ?Sized>(op: &A) -> Result<f64> {
    let sigma = power_iteration(op, 0x5eed, 1e-6, 1000)?;
    if !(sigma > 0.0) {
        return Err(Error::Numeric("cannot rescale a zero matrix".into()));
    }
    Ok(1.0 / sigma)
}

/// Compressed measurements `y[j, t_k]`, stored measurement-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CsData {
    pub meta: MatrixMeta,
    times: TimeGrid,
    values: Vec<f64>,
    /// Relative standard deviation of the injected Gaussian noise; `0` for
    /// exact data.
    pub noise_level: f64,
}

impl CsData {
    pub fn new(
        meta: MatrixMeta,
        times: TimeGrid,
        values: Vec<f64>,
        noise_level: f64,
    ) -> Result<Self> {
        if values.len() != meta.m * times.len() {
            return Err(Error::Dimension(format!(
                "{} measurement values, expected {} x {}",
                values.len(),
                meta.m,
                times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "measurements contain non-finite values".into(),
            ));
        }
        if !(noise_level >= 0.0) {
            return Err(Error::config("noise level must be nonnegative"));
        }
        Ok(CsData {
            meta,
            times,
            values,
            noise_level,
        })
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    pub fn trace(&self, j: usize) -> &[f64] {
        let nt = self.times.len();
        &self.values[j * nt..(j + 1) * nt]
    }

    /// Measurements at time index `k`, one per row.
    pub fn slice(&self, k: usize) -> Vec<f64> {
        let nt = self.times.len();
        (0..self.meta.m).map(|j| self.values[j * nt + k]).collect()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        CsData::new(self.meta, self.times, values, self.noise_level)
    }
}

/// Time slice `k` of detector-major traces.
pub(crate) fn gather_slice(values: &[f64], channels: usize, nt: usize, k: usize) -> Vec<f64> {
    (0..channels).map(|i| values[i * nt + k]).collect()
}

/// Applies `scale * A` to every time slice of the pressure and optionally
/// adds i.i.d. Gaussian noise with standard deviation
/// `noise_level * max|p|`.
pub fn apply_measurement(
    matrix: &MeasurementMatrix,
    pressure: &PressureData,
    noise_level: f64,
) -> Result<CsData> {
    let n = pressure.grid().len();
    if matrix.n() != n {
        return Err(Error::Dimension(format!(
            "matrix has {} columns but the detector grid has {n} points",
            matrix.n()
        )));
    }
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::config(format!("invalid noise level {noise_level}")));
    }
    let nt = pressure.times().len();
    let m = matrix.m();
    let slices: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|k| {
            let x = gather_slice(pressure.values(), n, nt, k);
            let mut y = vec![0.0; m];
            matrix.apply(&x, &mut y);
            y
        })
        .collect();
    let mut values = vec![0.0; m * nt];
    for (k, y) in slices.iter().enumerate() {
        for (j, &v) in y.iter().enumerate() {
            values[j * nt + k] = v;
        }
    }
    if noise_level > 0.0 {
        let peak = pressure.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sd = noise_level * peak;
        if sd > 0.0 {
            let normal = Normal::new(0.0, sd).map_err(|e| Error::Numeric(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(matrix.seed() ^ NOISE_STREAM);
            values
                .iter_mut()
                .for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    CsData::new(*matrix.meta(), *pressure.times(), values, noise_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{phantom_pressure, Sphere, SpherePhantom};
    use crate::grids::{build_detector_grid, build_time_grid};

    fn dense_svd_norm(a: &DenseMatrix) -> f64 {
        let m = nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.data());
        m.singular_values().max()
    }

    #[test]
    fn bernoulli_is_deterministic_and_signed() {
        let a = build_bernoulli(2, 4, 7).unwrap();
        let b = build_bernoulli(2, 4, 7).unwrap();
        assert_eq!(a, b);
        match a.entries() {
            Entries::Signs(s) => assert!(s.iter().all(|&v| v == 1 || v == -1)),
            _ => panic!("bernoulli stores signs"),
        }
        assert_ne!(
            build_bernoulli(8, 16, 1).unwrap(),
            build_bernoulli(8, 16, 2).unwrap()
        );
    }

    #[test]
    fn bernoulli_mean_concentrates() {
        let (m, n) = (64, 256);
        let a = build_bernoulli(m, n, 2024).unwrap();
        let Entries::Signs(s) = a.entries() else {
            unreachable!()
        };
        let mean = s.iter().map(|&v| v as f64).sum::<f64>() / (m * n) as f64;
        assert!(mean.abs() <= 3.0 / ((m * n) as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn m_greater_than_n_is_rejected() {
        assert!(matches!(build_bernoulli(5, 4, 0), Err(Error::Config(_))));
        assert!(build_expander(5, 4, 2, 0).is_err());
        assert!(build_subsampled_hadamard(2, 6, 0).is_err());
        assert!(build_expander(4, 8, 5, 0).is_err());
    }

    #[test]
    fn full_hadamard_is_an_isometry() {
        let a = build_subsampled_hadamard(16, 16, 3).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 16];
        a.apply(&x, &mut y);
        let nx = x.iter().map(|v| v * v).sum::<f64>();
        let ny = y.iter().map(|v| v * v).sum::<f64>();
        assert!((nx - ny).abs() < 1e-12);
    }

    #[test]
    fn subsampled_hadamard_rows_are_distinct() {
        let a = build_subsampled_hadamard(4, 8, 11).unwrap();
        let Entries::Rows(r) = a.entries() else {
            unreachable!()
        };
        let mut s = r.clone();
        s.dedup();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn hadamard_delta_one_by_column_norms() {
        // Columns of a row subset of an orthonormal matrix: delta_1 is the
        // largest deviation of a squared column norm from one.
        let a = build_subsampled_hadamard(32, 64, 2).unwrap();
        let dense = a.to_dense();
        let brute = (0..64)
            .map(|i| (dense.column(i).iter().map(|v| v * v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let est = crate::sensing::estimate_rip_constant(&a, 1).unwrap();
        assert!((brute - est).abs() < 1e-12);
        // every column of H_64 has entries +-1/8, so 32 of them give norm^2 = 1/2
        assert!((brute - 0.5).abs() < 1e-12);
    }

    #[test]
    fn expander_column_sums() {
        let a = build_expander(1024, 4096, 15, 99).unwrap();
        for i in 0..4096 {
            let s = a.column_support(i).unwrap();
            assert_eq!(s.len(), 15);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        let sat = build_expander(6, 10, 6, 1).unwrap();
        let dense = sat.to_dense();
        for i in 0..10 {
            assert_eq!(dense.column(i).iter().sum::<f64>(), 6.0);
        }
        let small = build_expander(8, 16, 3, 5).unwrap();
        let nnz = small
            .to_dense()
            .data()
            .iter()
            .filter(|&&v| v != 0.0)
            .count();
        assert_eq!(nnz, 48);
    }

    #[test]
    fn adjoints_match_dense_transpose() {
        let mats = [
            build_bernoulli(5, 9, 1).unwrap(),
            build_subsampled_hadamard(5, 8, 1).unwrap(),
            build_expander(5, 9, 2, 1).unwrap().with_scale(0.3).unwrap(),
            build_identity_subset(vec![4, 0, 2], 6).unwrap(),
        ];
        for a in &mats {
            let dense = a.to_dense();
            let y: Vec<f64> = (0..a.m()).map(|j| j as f64 - 1.5).collect();
            let mut x = vec![0.0; a.n()];
            let mut x_dense = vec![0.0; a.n()];
            a.apply_adjoint(&y, &mut x);
            dense.apply_adjoint(&y, &mut x_dense);
            for (u, v) in x.iter().zip(&x_dense) {
                assert!((u - v).abs() < 1e-12, "{:?}", a.kind());
            }
        }
    }

    #[test]
    fn rescale_examples() {
        let id = build_identity(10).unwrap();
        let r = rescale_to_unit_norm(&id).unwrap();
        assert!((r.scale() - 1.0).abs() < 1e-12);

        let two = DenseMatrix::new(1, 1, vec![2.0]).unwrap();
        assert!((unit_norm_scale(&two).unwrap() - 0.5).abs() < 1e-12);
        assert!(unit_norm_scale(&DenseMatrix::new(1, 1, vec![0.0]).unwrap()).is_err());

        let e = build_expander(8, 16, 3, 4).unwrap();
        let sigma = e.unscaled_norm();
        let oracle = dense_svd_norm(&e.to_dense());
        assert!(
            (sigma - oracle).abs() <= 1e-4 * oracle,
            "{sigma} vs {oracle}"
        );
        let unit = rescale_to_unit_norm(&e).unwrap();
        let n2 = dense_svd_norm(&unit.to_dense());
        assert!((n2 - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn identity_measurement_reproduces_pressure() {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 4, 3).unwrap();
        let t = build_time_grid(3.0, 41).unwrap();
        let ph = SpherePhantom::new(vec![Sphere::new([0.0, 0.1, 0.8], 0.3, 1.0).unwrap()]).unwrap();
        let p = phantom_pressure(&ph, &g, &t).unwrap();
        let y = apply_measurement(&build_identity(12).unwrap(), &p, 0.0).unwrap();
        assert_eq!(y.values(), p.values());
    }

    #[test]
    fn single_row_sums_all_channels() {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 3, 3).unwrap();
        let t = build_time_grid(3.0, 31).unwrap();
        let ph = SpherePhantom::new(vec![Sphere::new([0.2, 0.0, 0.7], 0.3, 1.0).unwrap()]).unwrap();
        let p = phantom_pressure(&ph, &g, &t).unwrap();
        let a = build_expander(1, 9, 1, 0).unwrap();
        let y = apply_measurement(&a, &p, 0.0).unwrap();
        for k in 0..31 {
            let s: f64 = (0..9).map(|i| p.at(i, k)).sum();
            assert!((y.values()[k] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 3, 3).unwrap();
        let t = build_time_grid(3.0, 31).unwrap();
        let p = PressureData::zeros(g, t);
        let a = build_expander(2, 10, 1, 0).unwrap();
        assert!(matches!(
            apply_measurement(&a, &p, 0.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn noise_is_reproducible_and_flagged() {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 4, 4).unwrap();
        let t = build_time_grid(3.0, 31).unwrap();
        let ph = SpherePhantom::new(vec![Sphere::new([0.0, 0.0, 0.7], 0.3, 1.0).unwrap()]).unwrap();
        let p = phantom_pressure(&ph, &g, &t).unwrap();
        let a = build_expander(8, 16, 2, 3).unwrap();
        let clean = apply_measurement(&a, &p, 0.0).unwrap();
        let n1 = apply_measurement(&a, &p, 0.05).unwrap();
        let n2 = apply_measurement(&a, &p, 0.05).unwrap();
        assert_eq!(n1, n2);
        assert_eq!(n1.noise_level, 0.05);
        assert_ne!(n1.values(), clean.values());
    }
}
