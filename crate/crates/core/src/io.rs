//! Binary containers and text exports. All multi-byte values are
//! little-endian.
//!
//! | magic  | contents                                   |
//! |--------|--------------------------------------------|
//! | `PATP` | detector traces (pressure, filtered data)  |
//! | `PATY` | compressed measurements                    |
//! | `PATM` | measurement matrix                         |
//! | `PATI` | reconstructed image                        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::{DetectorTraces, PressureData};
use crate::grids::{build_recon_grid, build_time_grid, Axis, DetectorGrid, TimeGrid};
use crate::recon::ReconImage;
use crate::sensing::{CsData, Entries, MatrixKind, MatrixMeta, MeasurementMatrix};
use crate::sparsify::FilterTag;

pub const PRESSURE_MAGIC: &[u8; 4] = b"PATP";
pub const MEASUREMENT_MAGIC: &[u8; 4] = b"PATY";
pub const MATRIX_MAGIC: &[u8; 4] = b"PATM";
pub const IMAGE_MAGIC: &[u8; 4] = b"PATI";

/// Plain traces.
pub const PRESSURE_VERSION: u16 = 1;
/// Traces preceded by a filter tag byte.
pub const FILTERED_VERSION: u16 = 2;

struct Reader<R> {
    inner: R,
    what: &'static str,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.what, "truncated file")
            } else {
                Error::Io(e)
            }
        })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64()).collect()
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>()?;
        if &got != expected {
            return Err(Error::format(
                self.what,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self.inner.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(Error::format(self.what, "trailing bytes after payload")),
        }
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::config(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Contents of a `PATP` file. Detector extents are not stored; pair the
/// counts with a [`DetectorGrid`] from the experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub tag: Option<FilterTag>,
    pub nx: usize,
    pub ny: usize,
    pub times: TimeGrid,
    pub values: Vec<f64>,
}

impl TraceFile {
    pub fn into_pressure(self, grid: DetectorGrid) -> Result<PressureData> {
        if grid.nx() != self.nx || grid.ny() != self.ny {
            return Err(Error::Dimension(format!(
                "file holds a {} x {} detector grid, configuration has {} x {}",
                self.nx,
                self.ny,
                grid.nx(),
                grid.ny()
            )));
        }
        PressureData::new(grid, self.times, self.values)
    }
}

/// Writes traces as `PATP`; a `tag` selects the filtered layout.
pub fn write_traces(
    w: &mut impl Write,
    data: &impl DetectorTraces,
    tag: Option<FilterTag>,
) -> Result<()> {
    w.write_all(PRESSURE_MAGIC)?;
    match tag {
        None => w.write_all(&PRESSURE_VERSION.to_le_bytes())?,
        Some(tag) => {
            w.write_all(&FILTERED_VERSION.to_le_bytes())?;
            w.write_all(&[tag.code()])?;
        }
    }
    put_u32(w, data.grid().nx())?;
    put_u32(w, data.grid().ny())?;
    put_u32(w, data.times().len())?;
    w.write_all(&data.times().t_max().to_le_bytes())?;
    put_f64s(w, data.values())
}

pub fn read_traces(r: impl Read) -> Result<TraceFile> {
    let mut r = Reader {
        inner: r,
        what: "PATP",
    };
    r.magic(PRESSURE_MAGIC)?;
    let tag = match r.u16()? {
        PRESSURE_VERSION => None,
        FILTERED_VERSION => {
            let code = r.u8()?;
            Some(
                FilterTag::from_code(code)
                    .ok_or_else(|| Error::format("PATP", format!("unknown filter tag {code}")))?,
            )
        }
        v => return Err(Error::format("PATP", format!("unsupported version {v}"))),
    };
    let nx = r.u32()?;
    let ny = r.u32()?;
    let nt = r.u32()?;
    let t_max = r.f64()?;
    let times = build_time_grid(t_max, nt).map_err(|e| Error::format("PATP", e.to_string()))?;
    let values = r.f64s(nx * ny * nt)?;
    r.finish()?;
    Ok(TraceFile {
        tag,
        nx,
        ny,
        times,
        values,
    })
}

fn write_meta(w: &mut impl Write, meta: &MatrixMeta) -> Result<()> {
    w.write_all(&[meta.kind.code()])?;
    put_u32(w, meta.m)?;
    put_u32(w, meta.n)?;
    put_u32(w, meta.d)?;
    w.write_all(&meta.seed.to_le_bytes())?;
    w.write_all(&meta.scale.to_le_bytes())?;
    Ok(())
}

fn read_meta<R: Read>(r: &mut Reader<R>) -> Result<MatrixMeta> {
    let code = r.u8()?;
    let kind = MatrixKind::from_code(code)
        .ok_or_else(|| Error::format(r.what, format!("unknown matrix kind {code}")))?;
    Ok(MatrixMeta {
        kind,
        m: r.u32()?,
        n: r.u32()?,
        d: r.u32()?,
        seed: r.u64()?,
        scale: r.f64()?,
    })
}

/// `PATY`: magic, u16 version, matrix header (u8 kind, u32 m, n, d, u64
/// seed, f64 scale), f64 noise level, u32 n_t, f64 t_max, then `m * n_t`
/// values, measurement-major.
pub fn write_measurements(w: &mut impl Write, cs: &CsData) -> Result<()> {
    w.write_all(MEASUREMENT_MAGIC)?;
    w.write_all(&1u16.to_le_bytes())?;
    write_meta(w, &cs.meta)?;
    w.write_all(&cs.noise_level.to_le_bytes())?;
    put_u32(w, cs.times().len())?;
    w.write_all(&cs.times().t_max().to_le_bytes())?;
    put_f64s(w, cs.values())
}

pub fn read_measurements(r: impl Read) -> Result<CsData> {
    let mut r = Reader {
        inner: r,
        what: "PATY",
    };
    r.magic(MEASUREMENT_MAGIC)?;
    let version = r.u16()?;
    if version != 1 {
        return Err(Error::format(
            "PATY",
            format!("unsupported version {version}"),
        ));
    }
    let meta = read_meta(&mut r)?;
    let noise = r.f64()?;
    let nt = r.u32()?;
    let t_max = r.f64()?;
    let times = build_time_grid(t_max, nt).map_err(|e| Error::format("PATY", e.to_string()))?;
    let values = r.f64s(meta.m * nt)?;
    r.finish()?;
    CsData::new(meta, times, values, noise)
}

/// `PATM`: magic, u16 version, matrix header, then the payload: `m * n`
/// i8 signs row-major (Bernoulli), `m` u32 row indices (Hadamard, identity
/// subset) or `n * d` u32 row indices column after column (expander).
pub fn write_matrix(w: &mut impl Write, matrix: &MeasurementMatrix) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&1u16.to_le_bytes())?;
    write_meta(w, matrix.meta())?;
    match matrix.entries() {
        Entries::Signs(s) => {
            let bytes: Vec<u8> = s.iter().map(|&v| v as u8).collect();
            w.write_all(&bytes)?;
        }
        Entries::Rows(idx) | Entries::Columns(idx) => {
            for &i in idx {
                w.write_all(&i.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_matrix(r: impl Read) -> Result<MeasurementMatrix> {
    let mut r = Reader {
        inner: r,
        what: "PATM",
    };
    r.magic(MATRIX_MAGIC)?;
    let version = r.u16()?;
    if version != 1 {
        return Err(Error::format(
            "PATM",
            format!("unsupported version {version}"),
        ));
    }
    let meta = read_meta(&mut r)?;
    let indices = |r: &mut Reader<_>, count: usize| -> Result<Vec<u32>> {
        (0..count).map(|_| r.u32().map(|v| v as u32)).collect()
    };
    let entries = match meta.kind {
        MatrixKind::Bernoulli => Entries::Signs(
            (0..meta.m * meta.n)
                .map(|_| r.u8().map(|b| b as i8))
                .collect::<Result<_>>()?,
        ),
        MatrixKind::HadamardSubsampled | MatrixKind::IdentitySubset => {
            Entries::Rows(indices(&mut r, meta.m)?)
        }
        MatrixKind::Expander => Entries::Columns(indices(&mut r, meta.n * meta.d)?),
    };
    r.finish()?;
    MeasurementMatrix::from_stored(meta, entries).map_err(|e| Error::format("PATM", e.to_string()))
}

/// `PATI`: magic, u16 version, u32 n_x, n_y, n_z, six f64 extents
/// (x_min, x_max, y_min, y_max, z_min, z_max), then the values.
pub fn write_image(w: &mut impl Write, image: &ReconImage) -> Result<()> {
    let g = image.grid();
    w.write_all(IMAGE_MAGIC)?;
    w.write_all(&1u16.to_le_bytes())?;
    for a in [g.x(), g.y(), g.z()] {
        put_u32(w, a.len())?;
    }
    for a in [g.x(), g.y(), g.z()] {
        put_f64s(w, &[a.min(), a.max()])?;
    }
    put_f64s(w, image.values())
}

pub fn read_image(r: impl Read) -> Result<ReconImage> {
    let mut r = Reader {
        inner: r,
        what: "PATI",
    };
    r.magic(IMAGE_MAGIC)?;
    let version = r.u16()?;
    if version != 1 {
        return Err(Error::format(
            "PATI",
            format!("unsupported version {version}"),
        ));
    }
    let counts = [r.u32()?, r.u32()?, r.u32()?];
    let mut axes = Vec::with_capacity(3);
    for c in counts {
        let (lo, hi) = (r.f64()?, r.f64()?);
        axes.push(Axis::new_or_point(lo, hi, c).map_err(|e| Error::format("PATI", e.to_string()))?);
    }
    let grid = build_recon_grid(axes[0], axes[1], axes[2])
        .map_err(|e| Error::format("PATI", e.to_string()))?;
    let values = r.f64s(grid.len())?;
    r.finish()?;
    ReconImage::new(grid, values)
}

/// `i,x,y,t,p`, one line per sample.
pub fn write_traces_csv(w: &mut impl Write, data: &impl DetectorTraces) -> Result<()> {
    writeln!(w, "i,x,y,t,p")?;
    let times = data.times().samples();
    for i in 0..data.grid().len() {
        let [x, y, _] = data.grid().position(i);
        for (t, p) in times.iter().zip(data.trace(i)) {
            writeln!(w, "{i},{x},{y},{t},{p}")?;
        }
    }
    Ok(())
}

pub fn write_image_csv(w: &mut impl Write, image: &ReconImage) -> Result<()> {
    writeln!(w, "k,x,y,z,value")?;
    for (k, v) in image.values().iter().enumerate() {
        let [x, y, z] = image.grid().position(k);
        writeln!(w, "{k},{x},{y},{z},{v}")?;
    }
    Ok(())
}

pub fn write_objectives_csv(w: &mut impl Write, objectives: &[f64]) -> Result<()> {
    writeln!(w, "t_index,objective")?;
    for (k, v) in objectives.iter().enumerate() {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

/// ASCII PGM (`P2`) after min-max normalization to `0..=255`. Row 0 is
/// written last so that the second axis points up.
pub fn write_pgm(w: &mut impl Write, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Dimension("PGM raster size mismatch".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    writeln!(w, "P2\n{width} {height}\n255")?;
    for row in (0..height).rev() {
        let line: Vec<String> = values[row * width..(row + 1) * width]
            .iter()
            .map(|&v| {
                let u = if span > 0.0 { (v - lo) / span } else { 0.0 };
                ((u * 255.0).round() as u8).to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Runs `f` on a buffered writer for `path` and flushes it.
pub fn save(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{phantom_pressure, SpherePhantom};
    use crate::grids::build_detector_grid;
    use crate::sensing::{
        apply_measurement, build_bernoulli, build_expander, build_identity_subset,
        build_subsampled_hadamard,
    };
    use proptest::prelude::*;

    fn small_pressure() -> PressureData {
        let g = build_detector_grid((-1.0, 1.0), (-1.0, 1.0), 4, 3).unwrap();
        let t = build_time_grid(3.0, 25).unwrap();
        phantom_pressure(&SpherePhantom::two_spheres(), &g, &t).unwrap()
    }

    #[test]
    fn pressure_header_layout() {
        let p = small_pressure();
        let mut buf = Vec::new();
        write_traces(&mut buf, &p, None).unwrap();
        assert_eq!(&buf[..4], b"PATP");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[14..18].try_into().unwrap()), 25);
        assert_eq!(f64::from_le_bytes(buf[18..26].try_into().unwrap()), 3.0);
        assert_eq!(buf.len(), 26 + 8 * 12 * 25);
        let back = read_traces(&buf[..])
            .unwrap()
            .into_pressure(*p.grid())
            .unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn filtered_traces_keep_their_tag() {
        let p = small_pressure();
        let mut buf = Vec::new();
        write_traces(&mut buf, &p, Some(FilterTag::SparsifyingT)).unwrap();
        let f = read_traces(&buf[..]).unwrap();
        assert_eq!(f.tag, Some(FilterTag::SparsifyingT));
        assert_eq!(f.values, p.values());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = small_pressure();
        let mut buf = Vec::new();
        write_traces(&mut buf, &p, None).unwrap();
        assert!(matches!(
            read_traces(&buf[..buf.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_traces(&extra[..]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_traces(&bad[..]).is_err());
        assert!(read_matrix(&buf[..]).is_err());
    }

    #[test]
    fn matrices_round_trip() {
        let mats = [
            build_bernoulli(3, 8, 5).unwrap(),
            build_subsampled_hadamard(3, 8, 5)
                .unwrap()
                .with_scale(0.5)
                .unwrap(),
            build_expander(4, 8, 2, 5).unwrap(),
            build_identity_subset(vec![1, 5], 8).unwrap(),
        ];
        for a in mats {
            let mut buf = Vec::new();
            write_matrix(&mut buf, &a).unwrap();
            assert_eq!(read_matrix(&buf[..]).unwrap(), a);
        }
    }

    #[test]
    fn measurements_round_trip() {
        let p = small_pressure();
        let a = build_expander(6, 12, 2, 1).unwrap();
        let cs = apply_measurement(&a, &p, 0.01).unwrap();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &cs).unwrap();
        assert_eq!(&buf[..4], b"PATY");
        assert_eq!(read_measurements(&buf[..]).unwrap(), cs);
    }

    #[test]
    fn pgm_is_normalized() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 2, &[0.0, 1.0, 2.0, 4.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "P2\n2 2\n255\n128 255\n0 64\n");
    }

    proptest! {
        #[test]
        fn image_round_trip(nx in 1usize..6, nz in 1usize..6, seed in any::<u64>()) {
            let grid = build_recon_grid(
                Axis::new(-1.0, 1.0, nx).unwrap(),
                Axis::new_or_point(0.0, 0.0, 1).unwrap(),
                Axis::new(0.0, 2.0, nz).unwrap(),
            ).unwrap();
            let values: Vec<f64> = (0..grid.len()).map(|k| (seed.wrapping_mul(k as u64 + 1) % 1000) as f64 / 7.0).collect();
            let img = ReconImage::new(grid, values).unwrap();
            let mut buf = Vec::new();
            write_image(&mut buf, &img).unwrap();
            prop_assert_eq!(read_image(&buf[..]).unwrap(), img);
        }
    }
}
