use cspat::experiment::{
    cmd_measure, cmd_reconstruct, cmd_simulate, run_pipeline, ExperimentConfig, PipelineMode,
    ReconInputs,
};
use cspat::forward::{phantom_pressure, Sphere, SpherePhantom};
use cspat::grids::{build_detector_grid, build_recon_grid, build_time_grid, Axis};
use cspat::io;
use cspat::recon::{modified_ubp, ubp_reconstruct};
use cspat::sensing::{apply_measurement, build_identity, rescale_to_unit_norm};
use cspat::solver::{recover_slices, SolverConfig};
use cspat::sparsify::apply_t_measurements;
use cspat::{DetectorTraces, PressureData, ReconGrid};
use proptest::prelude::*;

fn slice(offset: f64) -> ReconGrid {
    build_recon_grid(
        Axis::new(-1.0 + offset, 1.0 + offset, 21).unwrap(),
        Axis::new_or_point(0.0, 0.0, 1).unwrap(),
        Axis::new(0.2, 1.0, 9).unwrap(),
    )
    .unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn backprojection_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
        let g = build_detector_grid((-2.0, 2.0), (-2.0, 2.0), 10, 10).unwrap();
        let t = build_time_grid(4.0, 41).unwrap();
        let noise = |s: u64| {
            let mut x = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let values = (0..g.len() * t.len()).map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).collect();
            PressureData::new(g, t, values).unwrap()
        };
        let (p1, p2) = (noise(seed), noise(seed + 1));
        let mix: Vec<f64> = p1.values().iter().zip(p2.values()).map(|(x, y)| a * x + b * y).collect();
        let mix = PressureData::new(g, t, mix).unwrap();
        let grid = slice(0.0);
        let r1 = ubp_reconstruct(&p1, &grid).unwrap();
        let r2 = ubp_reconstruct(&p2, &grid).unwrap();
        let rm = ubp_reconstruct(&mix, &grid).unwrap();
        let scale = max_abs(rm.values()).max(1.0);
        for k in 0..grid.len() {
            let expect = a * r1.values()[k] + b * r2.values()[k];
            prop_assert!((rm.values()[k] - expect).abs() <= 1e-10 * scale);
        }
    }

    // Sphere parameters are kept off round numbers so that no sample lands
    // exactly on a wavefront, where rounding decides the N-wave's jump.
    #[test]
    fn shifting_everything_shifts_the_image(shift in -1.0..1.0f64) {
        let t = build_time_grid(5.0, 101).unwrap();
        let ball = SpherePhantom::new(vec![Sphere::new([0.2137, 0.0913, 0.6071], 0.2531, 1.0).unwrap()]).unwrap();
        let image = |dx: f64| {
            let g = build_detector_grid((-2.0 + dx, 2.0 + dx), (-2.0, 2.0), 16, 16).unwrap();
            let p = phantom_pressure(&ball.translated([dx, 0.0, 0.0]), &g, &t).unwrap();
            ubp_reconstruct(&p, &slice(dx)).unwrap()
        };
        let (a, b) = (image(0.0), image(shift));
        let scale = max_abs(a.values());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn amplitude_scales_the_image(factor in 0.1..5.0f64) {
        let g = build_detector_grid((-2.0, 2.0), (-2.0, 2.0), 12, 12).unwrap();
        let t = build_time_grid(4.0, 81).unwrap();
        let ph = SpherePhantom::two_spheres();
        let base = ubp_reconstruct(&phantom_pressure(&ph, &g, &t).unwrap(), &slice(0.0)).unwrap();
        let louder = ubp_reconstruct(&phantom_pressure(&ph.scaled(factor), &g, &t).unwrap(), &slice(0.0)).unwrap();
        let scale = max_abs(base.values());
        for (x, y) in base.values().iter().zip(louder.values()) {
            prop_assert!((factor * x - y).abs() <= 1e-10 * factor * scale);
        }
    }
}

#[test]
fn staged_files_reproduce_the_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::ci();
    cfg.detectors.nx = 16;
    cfg.detectors.ny = 16;
    cfg.time.n_t = 61;
    cfg.recon.nx = 61;
    cfg.recon.nz = 11;
    cfg.matrix.m = 64;
    cfg.matrix.d = 4;
    cfg.solver.n_iter = 300;
    cfg.output_dir = dir.path().to_path_buf();
    for mode in [
        PipelineMode::StandardUbp,
        PipelineMode::UndersampledStandard,
        PipelineMode::CsTwoStageT,
        PipelineMode::CsTwoStageIdentity,
    ] {
        cfg.mode = mode;
        let memory = run_pipeline(&cfg).unwrap();
        let pressure = cmd_simulate(&cfg, false).unwrap();
        if mode.is_compressed() {
            cmd_measure(&cfg, &pressure).unwrap();
        }
        let staged = cmd_reconstruct(&cfg, &ReconInputs::in_dir(dir.path())).unwrap();
        assert_eq!(memory.image, staged.image, "{mode:?}");
        assert_eq!(memory.errors, staged.errors);
        let stored = io::read_image(io::open(&dir.path().join("recon.pati")).unwrap()).unwrap();
        assert_eq!(stored, staged.image);
    }
}

#[test]
fn recovered_identity_data_reconstructs_like_ubp() {
    // with the full identity and a tiny lambda the recovery returns the
    // sparsified data
    let g = build_detector_grid((-2.0, 2.0), (-2.0, 2.0), 8, 8).unwrap();
    // long enough for every trace to end: the tail integral drops q(t_max)
    let t = build_time_grid(5.0, 101).unwrap();
    let p = phantom_pressure(&SpherePhantom::two_spheres().scaled(0.6), &g, &t).unwrap();
    let a = rescale_to_unit_norm(&build_identity(64).unwrap()).unwrap();
    let ty = apply_t_measurements(&apply_measurement(&a, &p, 0.0).unwrap()).unwrap();
    let cfg = SolverConfig {
        lambda: 1e-9,
        n_iter: 4000,
        ..SolverConfig::default()
    };
    let rec = recover_slices(&a, &ty, &g, &cfg).unwrap();
    let grid = slice(0.0);
    let reference = ubp_reconstruct(&p, &grid).unwrap();
    let image = modified_ubp(&rec, &grid).unwrap();
    let scale = max_abs(reference.values());
    let worst = reference
        .values()
        .iter()
        .zip(image.values())
        .fold(0.0f64, |w, (x, y)| w.max((x - y).abs()));
    assert!(worst <= 1e-3 * scale, "{worst} vs {scale}");
    assert_eq!(rec.grid(), &g);
}
