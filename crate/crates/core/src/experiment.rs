//! Experiment orchestration behind the `cspat` command line tool: the JSON
//! configuration, the individual pipeline stages and the files they write.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::forward::{
    phantom_pressure, phantom_source_slice, DetectorTraces, PressureData, SpherePhantom,
};
use crate::grids::{
    build_detector_grid, build_recon_grid, build_time_grid, Axis, DetectorGrid, ReconGrid, TimeGrid,
};
use crate::io;
use crate::metrics::{compressibility_check, error_reports, ErrorReport};
use crate::recon::{modified_ubp, ubp_reconstruct, undersampled_ubp, ReconImage};
use crate::sensing::{
    apply_measurement, build_bernoulli, build_expander, build_identity_subset,
    build_subsampled_hadamard, dense_hadamard, estimate_expander_theta, estimate_rip_constant,
    for_each_neighborhood, hadamard_apply, rescale_to_unit_norm, CsData, Entries, MatrixKind,
    MatrixMeta, MeasurementMatrix,
};
use crate::solver::{recover_slices, RecoveredData, SolverConfig};
use crate::sparsify::{apply_t_measurements, FilterTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// The full-size simulation setup.
    #[default]
    Paper,
    /// Desk-scale variant for quick runs and CI.
    Ci,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "ci" => Ok(Profile::Ci),
            other => Err(Error::config(format!(
                "unknown profile {other:?} (expected paper or ci)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Backprojection of the full point data.
    StandardUbp,
    /// Slice-wise recovery of the point data, then backprojection.
    CsTwoStageIdentity,
    /// Slice-wise recovery of the sparsified data, then the modified
    /// backprojection.
    CsTwoStageT,
    /// Backprojection of `m` point samples on a coarser Cartesian grid.
    UndersampledStandard,
}

impl PipelineMode {
    pub fn label(self) -> &'static str {
        match self {
            PipelineMode::StandardUbp => "standard",
            PipelineMode::CsTwoStageIdentity => "cs_identity",
            PipelineMode::CsTwoStageT => "cs",
            PipelineMode::UndersampledStandard => "undersampled",
        }
    }

    pub fn is_compressed(self) -> bool {
        matches!(
            self,
            PipelineMode::CsTwoStageIdentity | PipelineMode::CsTwoStageT
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub m: usize,
    /// Ones per column for expanders; ignored otherwise.
    pub d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub phantom: SpherePhantom,
    pub detectors: DetectorSpec,
    pub time: TimeSpec,
    pub recon: ReconSpec,
    pub matrix: MatrixSpec,
    pub solver: SolverConfig,
    pub noise_level: f64,
    pub mode: PipelineMode,
    pub output_dir: PathBuf,
}

pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    /// 64 x 64 detectors on `[-3, 3]^2`, 243 samples on `[0, 6]`, a
    /// 241 x 41 slice of `[-3, 3] x {0} x [0, 1]`, a 1024 x 4096 expander
    /// with 15 ones per column, `lambda = 1e-5`, 7500 FISTA iterations.
    pub fn paper() -> Self {
        ExperimentConfig {
            phantom: SpherePhantom::two_spheres(),
            detectors: DetectorSpec {
                x: [-3.0, 3.0],
                y: [-3.0, 3.0],
                nx: 64,
                ny: 64,
            },
            time: TimeSpec {
                t_max: 6.0,
                n_t: 243,
            },
            recon: ReconSpec {
                x: [-3.0, 3.0],
                y: [0.0, 0.0],
                z: [0.0, 1.0],
                nx: 241,
                ny: 1,
                nz: 41,
            },
            matrix: MatrixSpec {
                kind: MatrixKind::Expander,
                m: 1024,
                d: 15,
                seed: DEFAULT_SEED,
            },
            solver: SolverConfig::default(),
            noise_level: 0.0,
            mode: PipelineMode::CsTwoStageT,
            output_dir: PathBuf::from("out"),
        }
    }

    /// 32 x 32 detectors, 121 samples, `m = 256`, `d = 8`, 1500 iterations.
    pub fn ci() -> Self {
        let mut cfg = ExperimentConfig::paper();
        cfg.detectors.nx = 32;
        cfg.detectors.ny = 32;
        cfg.time.n_t = 121;
        cfg.matrix.m = 256;
        cfg.matrix.d = 8;
        cfg.solver.n_iter = 1500;
        cfg
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => ExperimentConfig::paper(),
            Profile::Ci => ExperimentConfig::ci(),
        }
    }

    /// Parses a JSON document layered over the profile's defaults. Keys
    /// that the configuration does not know are rejected.
    pub fn from_json(profile: Profile, text: &str) -> Result<Self> {
        let overlay: Value = serde_json::from_str(text)?;
        if !overlay.is_object() {
            return Err(Error::config("configuration must be a JSON object"));
        }
        let mut base = serde_json::to_value(ExperimentConfig::for_profile(profile))?;
        merge(&mut base, overlay);
        let cfg: ExperimentConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(profile: Profile, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_json(profile, &text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        let grid = self.detector_grid()?;
        let times = self.time_grid()?;
        if times.len() < crate::sparsify::MIN_SAMPLES {
            return Err(Error::config("need at least 5 time samples"));
        }
        self.recon_grid()?;
        self.solver.validate()?;
        let n = grid.len();
        let m = self.matrix.m;
        if m == 0 || m > n {
            return Err(Error::config(format!(
                "matrix rows m = {m} must lie in 1..={n}"
            )));
        }
        if self.matrix.kind == MatrixKind::Expander && (self.matrix.d == 0 || self.matrix.d > m) {
            return Err(Error::config(format!(
                "expander needs 1 <= d <= m, got d = {}",
                self.matrix.d
            )));
        }
        if self.matrix.kind == MatrixKind::HadamardSubsampled && !n.is_power_of_two() {
            return Err(Error::config(format!(
                "Hadamard matrices need n a power of two, got {n}"
            )));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::config("noise_level must be >= 0"));
        }
        if self.mode == PipelineMode::UndersampledStandard {
            self.acquisition_grid()?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.matrix.seed = seed;
        self
    }

    pub fn detector_grid(&self) -> Result<DetectorGrid> {
        let d = &self.detectors;
        build_detector_grid((d.x[0], d.x[1]), (d.y[0], d.y[1]), d.nx, d.ny)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        build_time_grid(self.time.t_max, self.time.n_t)
    }

    pub fn recon_grid(&self) -> Result<ReconGrid> {
        let r = &self.recon;
        build_recon_grid(
            Axis::new_or_point(r.x[0], r.x[1], r.nx)?,
            Axis::new_or_point(r.y[0], r.y[1], r.ny)?,
            Axis::new_or_point(r.z[0], r.z[1], r.nz)?,
        )
    }

    /// Grid on which point data are recorded: the detector grid, or for
    /// the undersampled mode a grid over the same square with about `m`
    /// points.
    pub fn acquisition_grid(&self) -> Result<DetectorGrid> {
        let full = self.detector_grid()?;
        if self.mode != PipelineMode::UndersampledStandard {
            return Ok(full);
        }
        let ratio = (full.len() as f64 / self.matrix.m as f64).sqrt();
        let nx = ((full.nx() as f64 / ratio).round() as usize).max(1);
        let ny = ((full.ny() as f64 / ratio).round() as usize).max(1);
        let d = &self.detectors;
        build_detector_grid((d.x[0], d.x[1]), (d.y[0], d.y[1]), nx, ny)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Point data on the acquisition grid.
pub fn simulate(cfg: &ExperimentConfig) -> Result<PressureData> {
    phantom_pressure(&cfg.phantom, &cfg.acquisition_grid()?, &cfg.time_grid()?)
}

/// The configured matrix for `n` detectors, rescaled to unit norm.
pub fn build_matrix(spec: &MatrixSpec, n: usize) -> Result<MeasurementMatrix> {
    let raw = match spec.kind {
        MatrixKind::Bernoulli => build_bernoulli(spec.m, n, spec.seed)?,
        MatrixKind::HadamardSubsampled => build_subsampled_hadamard(spec.m, n, spec.seed)?,
        MatrixKind::Expander => build_expander(spec.m, n, spec.d, spec.seed)?,
        MatrixKind::IdentitySubset => {
            if spec.m == n {
                build_identity_subset((0..n as u32).collect(), n)?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let mut pool: Vec<u32> = (0..n as u32).collect();
                for i in 0..spec.m {
                    let j = rng.gen_range(i..n);
                    pool.swap(i, j);
                }
                let mut rows = pool[..spec.m].to_vec();
                rows.sort_unstable();
                build_identity_subset(rows, n)?
            }
        }
    };
    rescale_to_unit_norm(&raw)
}

/// Compressed measurements of `pressure` with the configured matrix.
pub fn measure(
    cfg: &ExperimentConfig,
    pressure: &PressureData,
) -> Result<(MeasurementMatrix, CsData)> {
    let matrix = build_matrix(&cfg.matrix, pressure.grid().len())?;
    let cs = apply_measurement(&matrix, pressure, cfg.noise_level)?;
    Ok((matrix, cs))
}

/// Ground truth `p0` on the reconstruction grid.
pub fn ground_truth(cfg: &ExperimentConfig) -> Result<ReconImage> {
    Ok(phantom_source_slice(&cfg.phantom, &cfg.recon_grid()?))
}

/// Reconstruction from compressed data, with the recovered traces.
pub fn reconstruct_compressed(
    cfg: &ExperimentConfig,
    matrix: &MeasurementMatrix,
    cs: &CsData,
) -> Result<(ReconImage, RecoveredData)> {
    let grid = cfg.detector_grid()?;
    let recon = cfg.recon_grid()?;
    match cfg.mode {
        PipelineMode::CsTwoStageT => {
            let ty = apply_t_measurements(cs)?;
            let q = recover_slices(matrix, &ty, &grid, &cfg.solver)?;
            Ok((modified_ubp(&q, &recon)?, q))
        }
        PipelineMode::CsTwoStageIdentity => {
            let p = recover_slices(matrix, cs, &grid, &cfg.solver)?;
            let image = ubp_reconstruct(&p.clone().into_pressure()?, &recon)?;
            Ok((image, p))
        }
        other => Err(Error::config(format!(
            "mode {other:?} does not use compressed data"
        ))),
    }
}

/// Reconstruction from point data (standard and undersampled modes).
pub fn reconstruct_points(cfg: &ExperimentConfig, pressure: &PressureData) -> Result<ReconImage> {
    let recon = cfg.recon_grid()?;
    match cfg.mode {
        PipelineMode::StandardUbp => ubp_reconstruct(pressure, &recon),
        PipelineMode::UndersampledStandard => undersampled_ubp(pressure, &recon),
        other => Err(Error::config(format!(
            "mode {other:?} needs compressed data"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub image: ReconImage,
    pub truth: ReconImage,
    pub errors: Vec<ErrorReport>,
    /// Per-slice recovery, for the compressed modes.
    pub recovered: Option<RecoveredData>,
    /// Number of measurements `m` and of full-grid detectors `n`.
    pub m: usize,
    pub n: usize,
}

impl PipelineOutput {
    pub fn error(&self, alpha: u32) -> f64 {
        self.errors
            .iter()
            .find(|e| e.alpha == alpha)
            .map(|e| e.value)
            .expect("l1 and l2 errors are always reported")
    }
}

fn finish(
    cfg: &ExperimentConfig,
    image: ReconImage,
    recovered: Option<RecoveredData>,
    m: usize,
) -> Result<PipelineOutput> {
    let truth = ground_truth(cfg)?;
    let n = cfg.detector_grid()?.len();
    let label = format!("{}_{m}", cfg.mode.label());
    let errors = error_reports(&label, &image, &truth, m, n)?;
    Ok(PipelineOutput {
        image,
        truth,
        errors,
        recovered,
        m,
        n,
    })
}

/// All stages in memory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let pressure = simulate(cfg)?;
    if cfg.mode.is_compressed() {
        let (matrix, cs) = measure(cfg, &pressure)?;
        let (image, rec) = reconstruct_compressed(cfg, &matrix, &cs)?;
        finish(cfg, image, Some(rec), matrix.m())
    } else {
        let m = pressure.grid().len();
        finish(cfg, reconstruct_points(cfg, &pressure)?, None, m)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

pub const PRESSURE_FILE: &str = "pressure.patp";
pub const MEASUREMENT_FILE: &str = "measurements.paty";
pub const MATRIX_FILE: &str = "matrix.patm";
pub const IMAGE_FILE: &str = "recon.pati";

/// Writes the point data as `pressure.patp` (and `pressure.csv`).
pub fn cmd_simulate(cfg: &ExperimentConfig, csv: bool) -> Result<PathBuf> {
    cfg.validate()?;
    let pressure = simulate(cfg)?;
    let dir = out_dir(cfg)?;
    let path = dir.join(PRESSURE_FILE);
    io::save(&path, |w| io::write_traces(w, &pressure, None))?;
    if csv {
        io::save(&dir.join("pressure.csv"), |w| {
            io::write_traces_csv(w, &pressure)
        })?;
    }
    Ok(path)
}

/// Reads point data written by [`cmd_simulate`] and writes
/// `measurements.paty` and `matrix.patm`.
pub fn cmd_measure(cfg: &ExperimentConfig, pressure_path: &Path) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let pressure =
        io::read_traces(io::open(pressure_path)?)?.into_pressure(cfg.detector_grid()?)?;
    let (matrix, cs) = measure(cfg, &pressure)?;
    let dir = out_dir(cfg)?;
    let y_path = dir.join(MEASUREMENT_FILE);
    let a_path = dir.join(MATRIX_FILE);
    io::save(&y_path, |w| io::write_measurements(w, &cs))?;
    io::save(&a_path, |w| io::write_matrix(w, &matrix))?;
    Ok((y_path, a_path))
}

/// Input files of [`cmd_reconstruct`]; which ones are needed depends on the
/// mode.
#[derive(Debug, Clone, Default)]
pub struct ReconInputs {
    pub pressure: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
}

impl ReconInputs {
    /// The default file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        ReconInputs {
            pressure: Some(dir.join(PRESSURE_FILE)),
            measurements: Some(dir.join(MEASUREMENT_FILE)),
            matrix: Some(dir.join(MATRIX_FILE)),
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::config(format!("this mode needs a {what} file")))
}

/// Reconstructs from files and writes the image, previews and error table.
pub fn cmd_reconstruct(cfg: &ExperimentConfig, inputs: &ReconInputs) -> Result<PipelineOutput> {
    cfg.validate()?;
    let output = if cfg.mode.is_compressed() {
        let cs = io::read_measurements(io::open(required(&inputs.measurements, "measurement")?)?)?;
        let matrix = io::read_matrix(io::open(required(&inputs.matrix, "matrix")?)?)?;
        let (image, rec) = reconstruct_compressed(cfg, &matrix, &cs)?;
        finish(cfg, image, Some(rec), matrix.m())?
    } else {
        let pressure = io::read_traces(io::open(required(&inputs.pressure, "pressure")?)?)?
            .into_pressure(cfg.acquisition_grid()?)?;
        let m = pressure.grid().len();
        finish(cfg, reconstruct_points(cfg, &pressure)?, None, m)?
    };
    write_outputs(cfg, &output)?;
    Ok(output)
}

fn write_previews(dir: &Path, stem: &str, image: &ReconImage) -> Result<()> {
    let [nx, ny, nz] = image.grid().shape();
    if ny == 1 {
        let (w, h, v) = image.max_projection(1);
        return io::save(&dir.join(format!("{stem}.pgm")), |f| {
            io::write_pgm(f, w, h, &v)
        });
    }
    for (axis, name) in [(0, "x"), (1, "y"), (2, "z")] {
        if [nx, ny, nz][axis] > 1 {
            let (w, h, v) = image.max_projection(axis);
            io::save(&dir.join(format!("{stem}_mip_{name}.pgm")), |f| {
                io::write_pgm(f, w, h, &v)
            })?;
        }
    }
    Ok(())
}

fn write_outputs(cfg: &ExperimentConfig, out: &PipelineOutput) -> Result<()> {
    let dir = out_dir(cfg)?;
    io::save(&dir.join(IMAGE_FILE), |w| io::write_image(w, &out.image))?;
    io::save(&dir.join("recon.csv"), |w| {
        io::write_image_csv(w, &out.image)
    })?;
    write_previews(dir, "recon", &out.image)?;
    write_previews(dir, "truth", &out.truth)?;
    io::save(&dir.join("errors.csv"), |w| {
        writeln!(w, "{}", ErrorReport::CSV_HEADER)?;
        for e in &out.errors {
            writeln!(w, "{}", e.csv_row())?;
        }
        Ok(())
    })?;
    if let Some(rec) = &out.recovered {
        let tag = (cfg.mode == PipelineMode::CsTwoStageT).then_some(FilterTag::SparsifyingT);
        io::save(&dir.join("recovered.patp"), |w| {
            io::write_traces(w, rec, tag)
        })?;
        io::save(&dir.join("objectives.csv"), |w| {
            io::write_objectives_csv(w, &rec.objectives)
        })?;
    }
    Ok(())
}

/// Simulation, measurement and reconstruction, writing every stage's files.
pub fn cmd_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let pressure_path = cmd_simulate(cfg, false)?;
    let mut inputs = ReconInputs {
        pressure: Some(pressure_path.clone()),
        ..Default::default()
    };
    if cfg.mode.is_compressed() {
        let (y, a) = cmd_measure(cfg, &pressure_path)?;
        inputs.measurements = Some(y);
        inputs.matrix = Some(a);
    }
    cmd_reconstruct(cfg, &inputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub compression_factor: f64,
    pub m: usize,
    pub l1: f64,
    pub l2: f64,
}

/// Sparsified compressed-sensing reconstructions for each compression
/// factor `n / m`. Writes `series.csv` and one preview per factor.
pub fn cmd_series(cfg: &ExperimentConfig, factors: &[f64]) -> Result<Vec<SeriesPoint>> {
    if factors.is_empty() {
        return Err(Error::config(
            "series needs at least one compression factor",
        ));
    }
    cfg.validate()?;
    let pressure = simulate(&ExperimentConfig {
        mode: PipelineMode::CsTwoStageT,
        ..cfg.clone()
    })?;
    let n = pressure.grid().len();
    let mut points = Vec::with_capacity(factors.len());
    let dir = out_dir(cfg)?.to_path_buf();
    for &factor in factors {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::config(format!(
                "compression factor must be >= 1, got {factor}"
            )));
        }
        let m = ((n as f64 / factor).round() as usize).clamp(1, n);
        let mut run = cfg.clone();
        run.mode = PipelineMode::CsTwoStageT;
        run.matrix.m = m;
        run.matrix.d = run.matrix.d.min(m);
        let (matrix, cs) = measure(&run, &pressure)?;
        let (image, _) = reconstruct_compressed(&run, &matrix, &cs)?;
        let out = finish(&run, image, None, m)?;
        let (w, h, v) = out.image.max_projection(1);
        io::save(&dir.join(format!("series_factor_{factor}.pgm")), |f| {
            io::write_pgm(f, w, h, &v)
        })?;
        points.push(SeriesPoint {
            compression_factor: factor,
            m,
            l1: out.error(1),
            l2: out.error(2),
        });
    }
    io::save(&dir.join("series.csv"), |w| {
        writeln!(w, "compression_factor,alpha,error")?;
        for p in &points {
            writeln!(w, "{},1,{}", p.compression_factor, p.l1)?;
            writeln!(w, "{},2,{}", p.compression_factor, p.l2)?;
        }
        Ok(())
    })?;
    Ok(points)
}

/// Sizes for the exhaustive checks of [`cmd_verify_appendix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixSizes {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
}

impl Default for AppendixSizes {
    fn default() -> Self {
        AppendixSizes {
            m: 12,
            n: 24,
            d: 3,
            s: 2,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `None` for values that are only reported.
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppendixReport {
    pub checks: Vec<Check>,
}

impl AppendixReport {
    fn push(&mut self, name: impl Into<String>, value: f64, passed: Option<bool>) {
        self.checks.push(Check {
            name: name.into(),
            value,
            passed,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = match c.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            let _ = writeln!(s, "{status:4}  {:<52} {}", c.name, c.value);
        }
        s
    }
}

fn stored_expander(m: usize, d: usize, columns: Vec<u32>) -> Result<MeasurementMatrix> {
    MeasurementMatrix::from_stored(
        MatrixMeta {
            kind: MatrixKind::Expander,
            m,
            n: columns.len() / d,
            d,
            seed: 0,
            scale: 1.0,
        },
        Entries::Columns(columns),
    )
}

/// Exhaustive checks of the measurement-matrix constructions and the
/// sparsity estimates at enumerable sizes.
pub fn cmd_verify_appendix(sizes: AppendixSizes) -> Result<AppendixReport> {
    let mut report = AppendixReport::default();

    let id = build_identity_subset((0..8).collect(), 8)?;
    for s in 1..=3 {
        let delta = estimate_rip_constant(&id, s)?;
        report.push(
            format!("delta_{s}(identity 8x8) == 0"),
            delta,
            Some(delta == 0.0),
        );
    }

    let ones = build_expander(1, 2, 1, 0)?;
    let delta = estimate_rip_constant(&ones, 2)?;
    report.push("delta_2([1 1]) == 1", delta, Some(delta == 1.0));

    let dup = stored_expander(6, 2, vec![0, 1, 0, 1, 2, 3, 4, 5])?;
    let theta = estimate_expander_theta(&dup, 2)?;
    report.push(
        "theta_2(duplicate columns) == 1/2",
        theta,
        Some(theta == 0.5),
    );

    let AppendixSizes { m, n, d, s, seed } = sizes;
    let e = build_expander(m, n, d, seed)?;
    let columns_ok = (0..n).all(|i| {
        let c = e.column_support(i).expect("expander");
        c.len() == d && c.windows(2).all(|w| w[0] < w[1])
    });
    report.push(
        format!("expander {m}x{n}: every column has {d} ones"),
        d as f64,
        Some(columns_ok),
    );
    let mut bound_ok = true;
    let theta = estimate_expander_theta(&e, s)?;
    for_each_neighborhood(&e, s, |subset, size| {
        let k = subset.len() as f64;
        let lower = (1.0 - theta) * d as f64 * k;
        bound_ok &= size as f64 >= lower - 1e-12 && size as f64 <= d as f64 * k;
    })?;
    report.push(
        format!("expander {m}x{n}: two-sided bound for |I| <= {s}"),
        theta,
        Some(bound_ok),
    );
    report.push(
        format!("theta_{s}(expander {m}x{n}, d={d}) < 1/2"),
        theta,
        (theta < 0.5).then_some(true),
    );

    let mut worst_orth: f64 = 0.0;
    let mut worst_fast: f64 = 0.0;
    for k in 0..=6 {
        let size = 1usize << k;
        let h = dense_hadamard(size)?;
        for a in 0..size {
            for b in 0..size {
                let dot: f64 = (0..size).map(|r| h[r * size + a] * h[r * size + b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((dot - target).abs());
            }
            let mut unit = vec![0.0; size];
            unit[a] = 1.0;
            let col = hadamard_apply(&unit)?;
            for r in 0..size {
                worst_fast = worst_fast.max((col[r] - h[r * size + a]).abs());
            }
        }
    }
    report.push(
        "Hadamard H^T H = I up to n = 64",
        worst_orth,
        Some(worst_orth <= 1e-12),
    );
    report.push(
        "fast Hadamard equals dense up to n = 64",
        worst_fast,
        Some(worst_fast <= 1e-12),
    );

    let bern = build_bernoulli(16, 32, seed)?.with_scale(0.25)?;
    report.push(
        "delta_2(Bernoulli 16x32 / sqrt(16))",
        estimate_rip_constant(&bern, 2)?,
        None,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep_ok = true;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=32);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for q in [0.25, 0.5, 0.75] {
            for s in 1..=len {
                sweep_ok &= compressibility_check(&x, q, s)?;
            }
        }
    }
    report.push(
        "compressibility bound on 1000 random vectors",
        1000.0,
        Some(sweep_ok),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_match_the_reference_setup() {
        let p = ExperimentConfig::paper();
        assert_eq!(p.detector_grid().unwrap().len(), 4096);
        assert_eq!(p.time_grid().unwrap().len(), 243);
        assert_eq!(p.recon_grid().unwrap().len(), 9881);
        assert_eq!((p.matrix.m, p.matrix.d), (1024, 15));
        assert_eq!(
            p.solver,
            SolverConfig {
                lambda: 1e-5,
                n_iter: 7500,
                step: 1.0,
                tolerance: 0.0
            }
        );
        let c = ExperimentConfig::ci();
        assert_eq!(c.detector_grid().unwrap().len(), 1024);
        assert_eq!(
            (c.time.n_t, c.matrix.m, c.matrix.d, c.solver.n_iter),
            (121, 256, 8, 1500)
        );
    }

    #[test]
    fn json_overlays_defaults() {
        let cfg = ExperimentConfig::from_json(
            Profile::Ci,
            r#"{"matrix": {"seed": 9}, "solver": {"n_iter": 10}, "mode": "standard_ubp"}"#,
        )
        .unwrap();
        assert_eq!(cfg.matrix.seed, 9);
        assert_eq!(cfg.matrix.m, 256);
        assert_eq!(cfg.solver.n_iter, 10);
        assert_eq!(cfg.mode, PipelineMode::StandardUbp);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"colour": 1}"#,
            r#"{"solver": {"lamda": 1}}"#,
            r#"{"phantom": [{"center": [0,0,1], "radius": 0.1, "amplitude": 1, "x": 0}]}"#,
        ] {
            let err = ExperimentConfig::from_json(Profile::Paper, text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
        assert!(ExperimentConfig::from_json(Profile::Paper, "[]").is_err());
        assert!(ExperimentConfig::from_json(Profile::Paper, r#"{"matrix": {"m": 5000}}"#).is_err());
    }

    #[test]
    fn undersampled_grid_has_m_points() {
        let mut cfg = ExperimentConfig::paper();
        cfg.mode = PipelineMode::UndersampledStandard;
        let g = cfg.acquisition_grid().unwrap();
        assert_eq!((g.nx(), g.ny()), (32, 32));
        assert_eq!(g.x().min(), -3.0);
        assert_eq!(g.x().max(), 3.0);
    }

    #[test]
    fn empty_series_is_a_usage_error() {
        let err = cmd_series(&ExperimentConfig::ci(), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn appendix_report_passes() {
        let r = cmd_verify_appendix(AppendixSizes::default()).unwrap();
        assert!(r.all_passed(), "{}", r.render());
    }
}
