//! Compressed-sensing photoacoustic tomography with a planar detector.
//!
//! The crate simulates the pressure of uniformly absorbing spheres on the
//! plane `z = 0`, measures it through binary random matrices, recovers a
//! sparsified version of the pressure slice by slice with FISTA, and
//! reconstructs the source with universal backprojection.
//!
//! ```
//! use cspat::forward::{phantom_pressure, SpherePhantom};
//! use cspat::grids::{build_detector_grid, build_time_grid};
//!
//! let detectors = build_detector_grid((-3.0, 3.0), (-3.0, 3.0), 16, 16)?;
//! let times = build_time_grid(6.0, 121)?;
//! let p = phantom_pressure(&SpherePhantom::two_spheres(), &detectors, &times)?;
//! assert_eq!(p.into_values().len(), 256 * 121);
//! # Ok::<(), cspat::Error>(())
//! ```

pub mod error;
pub mod experiment;
pub mod forward;
pub mod grids;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod sensing;
pub mod solver;
pub mod sparsify;

pub use error::{Error, Result};
pub use forward::{DetectorTraces, PressureData, Sphere, SpherePhantom};
pub use grids::{Axis, DetectorGrid, ReconGrid, TimeGrid};
pub use recon::ReconImage;
pub use sensing::{CsData, MatrixKind, MeasurementMatrix};
pub use solver::{RecoveredData, SolverConfig};

// The guide's code listings are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    mod sensing {}
    #[doc = include_str!("../../../book/src/sparsify.md")]
    mod sparsify {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/recon.md")]
    mod recon {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
