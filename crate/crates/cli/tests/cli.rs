use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lidar_fiducial::pointcloud::{load_cloud, save_cloud, CloudFormat};
use lidar_fiducial::projection::make_config;
use lidar_fiducial::synth::{single_marker_scene, LidarModel, PoseSpec, ScanKind, Scene, Wall};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lidar-fiducial"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn model(&self, span_deg: f64) -> PathBuf {
        let m = LidarModel::grid_deg(ScanKind::SolidStateGrid, 0.05, 0.05, span_deg, span_deg);
        self.write("model.json", &serde_json::to_string(&m).unwrap())
    }

    /// Runs `synth` into `out` and returns the cloud path.
    fn synth(&self, scene: &Scene, out: &str, seed: u64) -> PathBuf {
        let scene_path = self.write("scene.json", &serde_json::to_string(scene).unwrap());
        let model = self.model(14.0);
        let dir = self.path(out);
        let o = run(&["synth", s(&scene_path), "--model", s(&model), "--seed", &seed.to_string(), "--out-dir", s(&dir)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dir.join("cloud.pcd")
    }
}

fn marker_scene() -> Scene {
    let mut scene = single_marker_scene(3, "lfm4x4_16", 0.172, 2.0);
    scene.lidar_pose = PoseSpec { xyz: [0.02, -0.03, 0.01], rpy_deg: [4.0, -1.0, 2.0] };
    scene
}

fn wall_scene() -> Scene {
    let mut scene = single_marker_scene(0, "lfm4x4_16", 0.172, 2.0);
    scene.markers.clear();
    scene.walls = vec![Wall { point: [2.0, 0.0, 0.0], normal: [-1.0, 0.0, 0.0], intensity: Some(0.4) }];
    scene
}

fn pgm_size(bytes: &[u8]) -> (usize, usize) {
    let header = String::from_utf8_lossy(&bytes[..32]);
    let mut tokens = header.split_whitespace().skip(1);
    let mut next = || tokens.next().unwrap().parse::<usize>().unwrap();
    (next(), next())
}

#[test]
fn render_dimensions_match_projection_config() {
    let f = Fixture::new();
    let cloud_path = f.synth(&wall_scene(), "wall", 1);
    let out = f.path("render");
    let o = run(&["render", s(&cloud_path), "--theta-a", "0.1", "--theta-i", "0.2", "--out-dir", s(&out)]);
    let summary = stdout_json(&o);
    let (cloud, _) = load_cloud(&cloud_path, CloudFormat::PcdBinary).unwrap();
    let cfg = make_config(&cloud, 0.1f64.to_radians(), 0.2f64.to_radians()).unwrap();
    let pgm = std::fs::read(out.join("intensity.pgm")).unwrap();
    assert_eq!(pgm_size(&pgm), (cfg.width, cfg.height));
    assert_eq!(pgm_size(&std::fs::read(out.join("range.pgm")).unwrap()), (cfg.width, cfg.height));
    assert_eq!(summary["width"], cfg.width);
    let ratio = summary["occupancy_ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0);
}

#[test]
fn livox_preset_uses_five_hundredths_degree() {
    let f = Fixture::new();
    let cloud_path = f.synth(&wall_scene(), "wall", 1);
    let preset = stdout_json(&run(&["render", s(&cloud_path), "--lidar-model", "livox_mid40", "--out-dir", s(&f.path("a"))]));
    let explicit =
        stdout_json(&run(&["render", s(&cloud_path), "--theta-a", "0.05", "--theta-i", "0.05", "--out-dir", s(&f.path("b"))]));
    assert_eq!(preset["width"], explicit["width"]);
    assert_eq!(preset["height"], explicit["height"]);
}

#[test]
fn missing_cloud_exits_2() {
    let o = run(&["render", "/nonexistent/cloud.pcd", "--lidar-model", "livox_mid40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn bad_flag_value_exits_2() {
    let o = run(&["render", "x.pcd", "--theta-a", "fast"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn detect_single_marker_and_empty_scene() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 2);
    let dets = stdout_json(&run(&["detect", s(&cloud), "--lidar-model", "livox_mid40"]));
    let dets = dets.as_array().unwrap();
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0]["id"], 3);
    assert_eq!(dets[0]["corners"].as_array().unwrap().len(), 4);

    let wall = f.synth(&wall_scene(), "w", 2);
    let none = stdout_json(&run(&["detect", s(&wall), "--lidar-model", "livox_mid40"]));
    assert_eq!(none, Value::Array(vec![]));
}

#[test]
fn detect_writes_debug_images() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 2);
    let out = f.path("dbg");
    let o = run(&["detect", s(&cloud), "--lidar-model", "livox_mid40", "--out-dir", s(&out), "--annotate", "--dump-binary"]);
    assert!(o.status.success());
    for name in ["detections.json", "binary.pbm", "binary.png", "annotated.png"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    assert!(std::fs::read(out.join("binary.pbm")).unwrap().starts_with(b"P4\n"));
}

#[test]
fn bad_codebook_file_exits_2() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 2);
    let book = f.write("book.txt", "not a codebook\n");
    let o = run(&["detect", s(&cloud), "--lidar-model", "livox_mid40", "--codebook", s(&book)]);
    assert_eq!(o.status.code(), Some(2));
}

fn position_error(pose: &Value, truth: &PoseSpec) -> f64 {
    let xyz: Vec<f64> = pose["xyz"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    xyz.iter().zip(truth.xyz).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn pose_recovers_synthetic_lidar_pose() {
    let f = Fixture::new();
    let scene = marker_scene();
    let cloud = f.synth(&scene, "m", 3);
    let map = f.path("m").join("marker_map.json");
    let o = run(&["pose", s(&cloud), "--lidar-model", "livox_mid40", "--marker-map", s(&map)]);
    let pose = stdout_json(&o);
    assert!(position_error(&pose, &scene.lidar_pose) <= 0.01);
    for (got, want) in pose["rpy_deg"].as_array().unwrap().iter().zip(scene.lidar_pose.rpy_deg) {
        assert!((got.as_f64().unwrap() - want).abs() <= 0.5, "{got} vs {want}");
    }
    assert_eq!(pose["n_points"], 4);
    let stderr = String::from_utf8_lossy(&o.stderr);
    for stage in ["load", "project", "detect", "features3d", "pose"] {
        let line = stderr
            .lines()
            .find(|l| l.starts_with(&format!("timing stage={stage} ms=")))
            .unwrap_or_else(|| panic!("no timing for {stage}"));
        assert!(line.rsplit('=').next().unwrap().parse::<f64>().is_ok());
    }
}

#[test]
fn pose_uses_every_marker_jointly() {
    let f = Fixture::new();
    let model = f.model(30.0);
    let out = f.path("two");
    let scene = repo_file("scenes/two_markers.json");
    let o = run(&["synth", s(&scene), "--model", s(&model), "--seed", "5", "--out-dir", s(&out)]);
    assert!(o.status.success());
    let map = out.join("marker_map.json");
    let pose = stdout_json(&run(&["pose", s(&out.join("cloud.pcd")), "--lidar-model", "livox_mid40", "--marker-map", s(&map)]));
    assert_eq!(pose["markers_used"], serde_json::json!([1, 7]));
    assert_eq!(pose["n_points"], 8);
    assert!(position_error(&pose, &PoseSpec { xyz: [0.0; 3], rpy_deg: [0.0; 3] }) <= 0.01);
}

#[test]
fn unmatched_map_exits_3() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 3);
    let other = single_marker_scene(9, "lfm4x4_16", 0.172, 2.0).marker_map().unwrap();
    let map = f.write("map.json", &other.to_json_value().to_string());
    let o = run(&["pose", s(&cloud), "--lidar-model", "livox_mid40", "--marker-map", s(&map)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("marker map"));
}

#[test]
fn pose_output_is_byte_identical_across_runs() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 4);
    let map = f.path("m").join("marker_map.json");
    let args = ["pose", s(&cloud), "--lidar-model", "livox_mid40", "--marker-map", s(&map)];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn flags_override_config_file() {
    let f = Fixture::new();
    let cloud = f.synth(&marker_scene(), "m", 2);
    // A threshold of 0.95 leaves the image black, so nothing is detected.
    let cfg = f.write("cfg.json", r#"{"lidar_model": "livox_mid40", "threshold": 0.95}"#);
    let dark = stdout_json(&run(&["detect", s(&cloud), "--config", s(&cfg)]));
    assert_eq!(dark.as_array().unwrap().len(), 0);
    let lit = stdout_json(&run(&["detect", s(&cloud), "--config", s(&cfg), "--threshold", "0.225"]));
    assert_eq!(lit.as_array().unwrap().len(), 1);

    let bad = f.write("bad.json", r#"{"thresh": 0.3}"#);
    assert_eq!(run(&["detect", s(&cloud), "--config", s(&bad)]).status.code(), Some(2));
}

#[test]
fn synth_is_deterministic() {
    let f = Fixture::new();
    let a = f.synth(&marker_scene(), "a", 11);
    let b = f.synth(&marker_scene(), "b", 11);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let truth = |p: &Path| std::fs::read(p.parent().unwrap().join("ground_truth.json")).unwrap();
    assert_eq!(truth(&a), truth(&b));
}

#[test]
fn synth_empty_scene_exits_2() {
    let f = Fixture::new();
    let scene = f.write("empty.json", r#"{"markers": [], "walls": [], "lidar_pose": {"xyz": [0,0,0], "rpy_deg": [0,0,0]}}"#);
    let model = f.model(10.0);
    let o = run(&["synth", s(&scene), "--model", s(&model), "--out-dir", s(&f.path("e"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn documented_scenes_round_trip() {
    let f = Fixture::new();
    let out = f.path("doc");
    let scene = repo_file("scenes/single_marker.json");
    let model = repo_file("scenes/solid_state_30deg.json");
    let o = run(&["synth", s(&scene), "--model", s(&model), "--seed", "1", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (cloud, report) = load_cloud(out.join("cloud.pcd"), CloudFormat::PcdBinary).unwrap();
    assert_eq!(report.records, cloud.len());
    assert_eq!(report.dropped_zero_range + report.dropped_non_finite, 0);
    let truth: Value = serde_json::from_slice(&std::fs::read(out.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["vertices"][0]["id"], 3);
    // Re-encoding the loaded cloud reproduces the file.
    let copy = out.join("copy.pcd");
    save_cloud(&cloud, &copy, CloudFormat::PcdBinary).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(out.join("cloud.pcd")).unwrap());
}

#[test]
fn synth_accepts_presets() {
    let f = Fixture::new();
    let scene = f.write("s.json", &serde_json::to_string(&wall_scene()).unwrap());
    let out = f.path("p");
    let o = run(&["synth", s(&scene), "--lidar-model", "vlp16", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["synth", s(&scene), "--lidar-model", "custom", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
