//! Corner lifting against synthetic ground truth.

use lidar_fiducial::detector::{Codebook, DetectorParams};
use lidar_fiducial::features3d::{lift_detection, LiftOutcome, Provenance};
use lidar_fiducial::pipeline::{self, Settings, Timings};
use lidar_fiducial::pointcloud::PointCloud;
use lidar_fiducial::preprocess::PreprocessParams;
use lidar_fiducial::projection::{build_intensity_image, spherical_from_cartesian};
use lidar_fiducial::synth::{generate_scan, single_marker_scene, GroundTruth, LidarModel, PoseSpec, ScanKind};
use nalgebra::Vector3;

const RES_DEG: f64 = 0.05;

fn settings() -> Settings {
    Settings {
        azimuth_res: RES_DEG.to_radians(),
        inclination_res: RES_DEG.to_radians(),
        preprocess: PreprocessParams::with_threshold(0.225),
        detector: DetectorParams::lidar(),
        codebook: Codebook::builtin_4x4(),
        search_limit: 5,
    }
}

fn scan(z: f64) -> (PointCloud, GroundTruth) {
    let mut scene = single_marker_scene(5, "lfm4x4_16", 0.172, 2.0);
    scene.lidar_pose = PoseSpec { xyz: [0.0, 0.01, z], rpy_deg: [1.5, 0.0, 0.0] };
    let model = LidarModel::grid_deg(ScanKind::SolidStateGrid, RES_DEG, RES_DEG, 12.0, 12.0);
    generate_scan(&scene, &model, 9).unwrap()
}

/// Distance from each lifted vertex to the true vertex, over the bound r * max(resolution).
fn normalized_errors(vertices: &[[f64; 3]; 4], truth: &[[f64; 3]; 4]) -> [f64; 4] {
    std::array::from_fn(|k| {
        let (got, want) = (Vector3::from(vertices[k]), Vector3::from(truth[k]));
        (got - want).norm() / (want.norm() * RES_DEG.to_radians())
    })
}

#[test]
fn four_observed_corners_within_quantization_bound() {
    let s = settings();
    let (cloud, truth) = scan(0.0);
    let mut t = Timings::default();
    let img = pipeline::render(&cloud, &s, &mut t).unwrap();
    let det = pipeline::detect(&img, &s, &mut t).unwrap();
    assert_eq!(det.detections.len(), 1);
    let LiftOutcome::Lifted(f) = lift_detection(&img, &det.detections[0], 5).outcome else {
        panic!("corner lifting failed");
    };
    assert!(f.iter().all(|x| x.provenance == Provenance::Observed));
    let errors = normalized_errors(&f.map(|x| x.point), &truth.marker(5).unwrap().vertices);
    assert!(errors.iter().all(|&e| e <= 1.0), "{errors:?}");
}

#[test]
fn gap_at_one_corner_is_interpolated_within_bound() {
    let s = settings();
    let (cloud, truth) = scan(0.003);
    let mut t = Timings::default();
    let img = pipeline::render(&cloud, &s, &mut t).unwrap();
    let det = pipeline::detect(&img, &s, &mut t).unwrap();
    let d = &det.detections[0];
    // Knock out every return in the cell under corner 2.
    let cfg = *img.config();
    let (cu, cv) = d.corners[2].nearest_cell();
    let kept: Vec<_> = cloud
        .points
        .iter()
        .filter(|p| {
            let (u, v) = cfg.pixel_unchecked(&spherical_from_cartesian(p).unwrap());
            (u, v) != (cu, cv)
        })
        .copied()
        .collect();
    assert!(kept.len() < cloud.len());
    let gapped = build_intensity_image(&PointCloud::new(kept), &cfg).unwrap();
    assert!(!gapped.is_observed(cu as usize, cv as usize));

    let LiftOutcome::Lifted(f) = lift_detection(&gapped, d, 5).outcome else {
        panic!("corner lifting failed");
    };
    let prov: Vec<_> = f.iter().map(|x| x.provenance).collect();
    assert_eq!(prov, [Provenance::Observed, Provenance::Observed, Provenance::Interpolated, Provenance::Observed]);
    let errors = normalized_errors(&f.map(|x| x.point), &truth.marker(5).unwrap().vertices);
    assert!(errors.iter().all(|&e| e <= 1.0), "{errors:?}");
}

#[test]
fn pipeline_reports_every_stage() {
    let s = settings();
    let (cloud, _) = scan(0.0);
    let scene = single_marker_scene(5, "lfm4x4_16", 0.172, 2.0);
    let (det, out, timings) = pipeline::run_pose(&cloud, &s, &scene.marker_map().unwrap()).unwrap();
    assert_eq!(det.detections.len(), 1);
    assert_eq!(out.correspondences.markers_used, vec![5]);
    let stages: Vec<&str> = timings.0.iter().map(|(s, _)| *s).collect();
    assert_eq!(stages, ["configure", "project", "preprocess", "detect", "features3d", "pose"]);
}
