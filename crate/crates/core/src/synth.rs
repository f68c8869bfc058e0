//! Ray-cast scan generator with exact ground truth.
//!
//! Frames: the LiDAR frame has x forward, y left, z up. A marker frame has
//! x to the right and y up as seen facing the printed side, z out of the
//! face, origin at the marker center. `side_m` is the edge length of the
//! outer black square.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::codebook::{get_bit, Codebook};
use crate::error::{Error, Result};
use crate::pointcloud::{PointCloud, PointL};
use crate::pose::{euler_zyx, rotation_from_euler_zyx, MarkerMap, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Fixed laser rows; jitter perturbs azimuth only.
    Mechanical,
    /// Uniform grid; jitter perturbs both angles.
    SolidStateGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub white: f64,
    pub black: f64,
    pub background: f64,
}

impl Default for Palette {
    fn default() -> Self {
        Self { white: 0.9, black: 0.05, background: 0.4 }
    }
}

/// Angles in radians, centred on the LiDAR x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarModel {
    pub kind: ScanKind,
    pub theta_h: f64,
    pub theta_v: f64,
    pub azimuth_span: f64,
    pub inclination_span: f64,
    #[serde(default)]
    pub jitter_sigma: f64,
    #[serde(default)]
    pub range_noise_sigma: f64,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default)]
    pub intensity_noise_sigma: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default)]
    pub palette: Palette,
}

fn default_max_range() -> f64 {
    100.0
}

impl LidarModel {
    /// Noiseless grid model with the given resolutions and spans, in degrees.
    pub fn grid_deg(kind: ScanKind, theta_h: f64, theta_v: f64, az_span: f64, incl_span: f64) -> Self {
        Self {
            kind,
            theta_h: theta_h.to_radians(),
            theta_v: theta_v.to_radians(),
            azimuth_span: az_span.to_radians(),
            inclination_span: incl_span.to_radians(),
            jitter_sigma: 0.0,
            range_noise_sigma: 0.0,
            dropout_rate: 0.0,
            intensity_noise_sigma: 0.0,
            max_range: default_max_range(),
            palette: Palette::default(),
        }
    }

    /// Sensor-like defaults keyed by the same names as the projection presets.
    pub fn preset(name: &str) -> Option<Self> {
        use crate::preprocess::LidarPreset;
        Some(match LidarPreset::parse(name)? {
            LidarPreset::LivoxMid40 => Self::grid_deg(ScanKind::SolidStateGrid, 0.05, 0.05, 38.4, 38.4),
            LidarPreset::Vlp16 => Self::grid_deg(ScanKind::Mechanical, 0.3, 1.33, 360.0, 30.0),
            LidarPreset::UltraPuck => Self::grid_deg(ScanKind::Mechanical, 0.4, 0.33, 360.0, 40.0),
            LidarPreset::Custom => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("lidar model: {what}")));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;
        if !positive(self.theta_h) || !positive(self.theta_v) {
            return bad("resolutions must be positive");
        }
        if !positive(self.azimuth_span) || !positive(self.inclination_span) {
            return bad("spans must be positive");
        }
        if self.azimuth_span > std::f64::consts::TAU || self.inclination_span > std::f64::consts::PI {
            return bad("spans exceed the sphere");
        }
        if ![self.jitter_sigma, self.range_noise_sigma, self.intensity_noise_sigma].into_iter().all(non_negative) {
            return bad("noise parameters must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if !positive(self.max_range) {
            return bad("max range must be positive");
        }
        Ok(())
    }

    /// Integer grid indices `k` with `k * step` inside the span.
    fn indices(step: f64, span: f64, wraps: bool) -> Vec<i64> {
        let half = span / 2.0;
        let lo = (-half / step - 1e-9).ceil() as i64;
        let mut hi = (half / step + 1e-9).floor() as i64;
        if wraps && (hi - lo + 1) as f64 * step > std::f64::consts::TAU - 1e-9 {
            hi -= 1;
        }
        (lo..=hi).collect()
    }

    /// Azimuth indices, ascending.
    pub fn columns(&self) -> Vec<i64> {
        Self::indices(self.theta_h, self.azimuth_span, true)
    }

    /// Inclination indices, top row first.
    pub fn rows(&self) -> Vec<i64> {
        let mut r = Self::indices(self.theta_v, self.inclination_span, false);
        r.reverse();
        r
    }
}

/// Position plus intrinsic Z-Y-X angles, mapping a child frame into its parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub xyz: [f64; 3],
    /// Roll, pitch, yaw.
    pub rpy_deg: [f64; 3],
}

impl PoseSpec {
    pub fn to_pose(&self) -> Pose {
        let [r, p, y] = self.rpy_deg.map(f64::to_radians);
        Pose::from_parts(rotation_from_euler_zyx(r, p, y), Vector3::from(self.xyz))
    }

    pub fn from_pose(pose: &Pose) -> Self {
        let (r, p, y, _) = euler_zyx(&pose.rotation);
        Self {
            xyz: [pose.translation.x, pose.translation.y, pose.translation.z],
            rpy_deg: [r.to_degrees(), p.to_degrees(), y.to_degrees()],
        }
    }

    /// Marker centred at `center`, printed side facing the LiDAR origin of
    /// the world frame, marker y along world z.
    pub fn facing_origin(center: [f64; 3]) -> Self {
        let c = Vector3::from(center);
        let z = -c.normalize();
        let x = Vector3::z().cross(&z).normalize();
        let y = z.cross(&x);
        let (r, p, yw, _) = euler_zyx(&Matrix3::from_columns(&[x, y, z]));
        Self { xyz: center, rpy_deg: [r.to_degrees(), p.to_degrees(), yw.to_degrees()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub id: u32,
    pub family: String,
    pub side_m: f64,
    pub pose: PoseSpec,
}

/// Infinite two-sided plane of uniform intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default)]
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub markers: Vec<MarkerSpec>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    pub lidar_pose: PoseSpec,
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for m in &self.markers {
            if !(m.side_m.is_finite() && m.side_m > 0.0) {
                return Err(Error::Config(format!("marker {}: side must be positive", m.id)));
            }
            if !finite(&m.pose.xyz) || !finite(&m.pose.rpy_deg) {
                return Err(Error::Config(format!("marker {}: non-finite pose", m.id)));
            }
        }
        for w in &self.walls {
            let n = Vector3::from(w.normal);
            if !finite(&w.point) || !(n.norm() > 1e-12) || !n.norm().is_finite() {
                return Err(Error::Config("wall plane is degenerate".into()));
            }
            if w.intensity.is_some_and(|i| !(0.0..=1.0).contains(&i)) {
                return Err(Error::Config("wall intensity must lie in [0, 1]".into()));
            }
        }
        if !finite(&self.lidar_pose.xyz) || !finite(&self.lidar_pose.rpy_deg) {
            return Err(Error::Config("non-finite lidar pose".into()));
        }
        Ok(())
    }

    /// World-frame vertices of every marker, in detection vertex order.
    pub fn marker_map(&self) -> Result<MarkerMap> {
        let mut map = MarkerMap::new();
        for m in &self.markers {
            map.insert(m.id, marker_vertices(m, &m.pose.to_pose()))?;
        }
        Ok(map)
    }
}

/// Top-left, bottom-left, bottom-right, top-right, mapped by `to_frame`.
pub fn marker_vertices(m: &MarkerSpec, to_frame: &Pose) -> [Vector3<f64>; 4] {
    let h = m.side_m / 2.0;
    [(-h, h), (-h, -h), (h, -h), (h, h)].map(|(x, y)| to_frame.transform(&Vector3::new(x, y, 0.0)))
}

/// Intensity of the marker face at plane-local `(x, y)`, or the palette
/// background outside the square.
pub fn marker_bit_at(book: &Codebook, code: u64, side_m: f64, x: f64, y: f64, palette: &Palette) -> f64 {
    let h = side_m / 2.0;
    if !(x.abs() <= h && y.abs() <= h) {
        return palette.background;
    }
    let n = book.cells_per_side();
    let cell = side_m / n as f64;
    let col = (((x + h) / cell).floor() as usize).min(n - 1);
    let row = (((h - y) / cell).floor() as usize).min(n - 1);
    let (b, g) = (book.border(), book.grid());
    let payload = (b..b + g).contains(&row) && (b..b + g).contains(&col);
    if payload && get_bit(code, g, row - b, col - b) {
        palette.white
    } else {
        palette.black
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerTruth {
    pub id: u32,
    /// LiDAR-frame vertices in detection order.
    pub vertices: [[f64; 3]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// LiDAR pose in the world frame.
    pub pose: PoseSpec,
    pub vertices: Vec<MarkerTruth>,
}

impl GroundTruth {
    /// The world-to-LiDAR transform a pose solver should recover.
    pub fn world_to_lidar(&self) -> Pose {
        self.pose.to_pose().inverse()
    }

    pub fn marker(&self, id: u32) -> Option<&MarkerTruth> {
        self.vertices.iter().find(|m| m.id == id)
    }
}

struct MarkerSurface {
    center: Vector3<f64>,
    ex: Vector3<f64>,
    ey: Vector3<f64>,
    normal: Vector3<f64>,
    side: f64,
    book: Codebook,
    code: u64,
}

struct WallSurface {
    point: Vector3<f64>,
    normal: Vector3<f64>,
    intensity: f64,
}

const COPLANAR_EPS: f64 = 1e-9;

pub fn generate_scan(scene: &Scene, model: &LidarModel, seed: u64) -> Result<(PointCloud, GroundTruth)> {
    generate_scan_with(scene, model, seed, &[])
}

/// Like [`generate_scan`], resolving families from `books` before the
/// built-in codebooks.
pub fn generate_scan_with(
    scene: &Scene,
    model: &LidarModel,
    seed: u64,
    books: &[Codebook],
) -> Result<(PointCloud, GroundTruth)> {
    scene.validate()?;
    model.validate()?;
    if scene.markers.is_empty() && scene.walls.is_empty() {
        return Err(Error::EmptyScene);
    }
    let world_to_lidar = scene.lidar_pose.to_pose().inverse();

    let mut markers = Vec::with_capacity(scene.markers.len());
    let mut truth = Vec::with_capacity(scene.markers.len());
    for m in &scene.markers {
        let book = books
            .iter()
            .find(|b| b.family() == m.family)
            .cloned()
            .or_else(|| Codebook::builtin(&m.family))
            .ok_or_else(|| Error::Codebook(format!("unknown family {}", m.family)))?;
        let code = book
            .code(m.id)
            .ok_or_else(|| Error::Codebook(format!("id {} not in {}", m.id, m.family)))?;
        let to_lidar = world_to_lidar.compose(&m.pose.to_pose());
        let r = to_lidar.rotation;
        markers.push(MarkerSurface {
            center: to_lidar.translation,
            ex: r.column(0).into(),
            ey: r.column(1).into(),
            normal: r.column(2).into(),
            side: m.side_m,
            book,
            code,
        });
        truth.push(MarkerTruth { id: m.id, vertices: marker_vertices(m, &to_lidar).map(|v| [v.x, v.y, v.z]) });
    }
    let walls: Vec<WallSurface> = scene
        .walls
        .iter()
        .map(|w| WallSurface {
            point: world_to_lidar.transform(&Vector3::from(w.point)),
            normal: world_to_lidar.rotation * Vector3::from(w.normal).normalize(),
            intensity: w.intensity.unwrap_or(model.palette.background),
        })
        .collect();

    let rows = model.rows();
    let cols = model.columns();
    let per_row: Vec<Vec<PointL>> = rows
        .par_iter()
        .enumerate()
        .map(|(row_idx, &i)| scan_row(model, &markers, &walls, seed, row_idx as u64, i, &cols))
        .collect();
    let points: Vec<PointL> = per_row.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptyScene);
    }
    let mut cloud = PointCloud::new(points);
    cloud.source_meta = Some(format!("synthetic scan, seed {seed}"));
    Ok((cloud, GroundTruth { pose: scene.lidar_pose, vertices: truth }))
}

fn scan_row(
    model: &LidarModel,
    markers: &[MarkerSurface],
    walls: &[WallSurface],
    seed: u64,
    stream: u64,
    row: i64,
    cols: &[i64],
) -> Vec<PointL> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let jitter = Normal::new(0.0, model.jitter_sigma).expect("validated sigma");
    let range_noise = Normal::new(0.0, model.range_noise_sigma).expect("validated sigma");
    let intensity_noise = Normal::new(0.0, model.intensity_noise_sigma).expect("validated sigma");
    let mut out = Vec::with_capacity(cols.len());
    for &j in cols {
        let mut theta = j as f64 * model.theta_h;
        let mut phi = row as f64 * model.theta_v;
        if model.jitter_sigma > 0.0 {
            theta += rng.sample(jitter);
            if model.kind == ScanKind::SolidStateGrid {
                phi += rng.sample(jitter);
            }
        }
        if model.dropout_rate > 0.0 && rng.random::<f64>() < model.dropout_rate {
            continue;
        }
        let dir = Vector3::new(phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin());
        let Some((t, intensity)) = cast(&dir, markers, walls, &model.palette) else {
            continue;
        };
        if t > model.max_range {
            continue;
        }
        let mut range = t;
        if model.range_noise_sigma > 0.0 {
            range += rng.sample(range_noise);
        }
        let mut value = intensity;
        if model.intensity_noise_sigma > 0.0 {
            value = (value + rng.sample(intensity_noise)).clamp(0.0, 1.0);
        }
        if range > 0.0 {
            out.push(PointL::from_vector(&(dir * range), value));
        }
    }
    out
}

/// Nearest hit along `dir` from the origin. Markers sitting on a wall win.
fn cast(dir: &Vector3<f64>, markers: &[MarkerSurface], walls: &[WallSurface], palette: &Palette) -> Option<(f64, f64)> {
    let mut wall_hit: Option<(f64, f64)> = None;
    for w in walls {
        let denom = dir.dot(&w.normal);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = w.point.dot(&w.normal) / denom;
        if t > 0.0 && wall_hit.is_none_or(|(best, _)| t < best) {
            wall_hit = Some((t, w.intensity));
        }
    }
    let mut marker_hit: Option<(f64, f64)> = None;
    for m in markers {
        let denom = dir.dot(&m.normal);
        if denom >= 0.0 {
            continue;
        }
        let t = m.center.dot(&m.normal) / denom;
        if t <= 0.0 || marker_hit.is_some_and(|(best, _)| t >= best) {
            continue;
        }
        let local = dir * t - m.center;
        let (x, y) = (local.dot(&m.ex), local.dot(&m.ey));
        let h = m.side / 2.0;
        if x.abs() <= h && y.abs() <= h {
            marker_hit = Some((t, marker_bit_at(&m.book, m.code, m.side, x, y, palette)));
        }
    }
    match (marker_hit, wall_hit) {
        (Some(mh), Some(wh)) if mh.0 <= wh.0 * (1.0 + COPLANAR_EPS) => Some(mh),
        (Some(_), Some(wh)) => Some(wh),
        (hit, None) => hit,
        (None, wh) => wh,
    }
}

/// Single marker facing the LiDAR at `(distance, 0, 0)`, flush on a wall.
pub fn single_marker_scene(id: u32, family: &str, side_m: f64, distance: f64) -> Scene {
    Scene {
        markers: vec![MarkerSpec {
            id,
            family: family.to_string(),
            side_m,
            pose: PoseSpec::facing_origin([distance, 0.0, 0.0]),
        }],
        walls: vec![Wall { point: [distance, 0.0, 0.0], normal: [-1.0, 0.0, 0.0], intensity: None }],
        lidar_pose: PoseSpec { xyz: [0.0; 3], rpy_deg: [0.0; 3] },
    }
}

/// Per-id world vertices of a scene keyed for lookup.
pub fn world_vertices(scene: &Scene) -> BTreeMap<u32, [Vector3<f64>; 4]> {
    scene.markers.iter().map(|m| (m.id, marker_vertices(m, &m.pose.to_pose()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall_only() -> Scene {
        Scene {
            markers: vec![],
            walls: vec![Wall { point: [2.0, 0.0, 0.0], normal: [1.0, 0.0, 0.0], intensity: Some(0.4) }],
            lidar_pose: PoseSpec { xyz: [0.0; 3], rpy_deg: [0.0; 3] },
        }
    }

    #[test]
    fn three_by_three_rays_hit_wall() {
        let model = LidarModel::grid_deg(ScanKind::Mechanical, 1.0, 1.0, 2.0, 2.0);
        let (cloud, truth) = generate_scan(&wall_only(), &model, 0).unwrap();
        assert_eq!(cloud.len(), 9);
        assert!(cloud.points.iter().all(|p| (p.x - 2.0).abs() < 1e-12 && p.intensity == 0.4));
        assert!(truth.vertices.is_empty());
    }

    #[test]
    fn same_row_samples_step_by_theta_h() {
        let model = LidarModel::grid_deg(ScanKind::Mechanical, 0.3, 1.33, 6.0, 2.66);
        let (cloud, _) = generate_scan(&wall_only(), &model, 0).unwrap();
        let cols = model.columns().len();
        assert_eq!(cloud.len(), cols * model.rows().len());
        for w in cloud.points[..cols].windows(2) {
            let d = w[1].y.atan2(w[1].x) - w[0].y.atan2(w[0].x);
            assert!((d - model.theta_h).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_scene_errors() {
        let mut scene = wall_only();
        scene.walls.clear();
        let model = LidarModel::grid_deg(ScanKind::Mechanical, 1.0, 1.0, 2.0, 2.0);
        assert!(matches!(generate_scan(&scene, &model, 0), Err(Error::EmptyScene)));
        scene.walls.push(Wall { point: [-2.0, 0.0, 0.0], normal: [1.0, 0.0, 0.0], intensity: None });
        assert!(matches!(generate_scan(&scene, &model, 0), Err(Error::EmptyScene)));
    }

    #[test]
    fn full_circle_does_not_duplicate_seam() {
        let model = LidarModel::grid_deg(ScanKind::Mechanical, 0.4, 1.0, 360.0, 2.0);
        assert_eq!(model.columns().len(), 900);
    }

    #[test]
    fn marker_bits_and_background() {
        let book = Codebook::builtin_4x4();
        let (id, code) = book.codes()[0];
        let palette = Palette::default();
        let side = 0.6;
        let cell = side / book.cells_per_side() as f64;
        assert_eq!(marker_bit_at(&book, code, side, -0.29, 0.29, &palette), palette.black);
        assert_eq!(marker_bit_at(&book, code, side, 0.31, 0.0, &palette), palette.background);
        for r in 0..4 {
            for c in 0..4 {
                let x = -side / 2.0 + (c as f64 + 1.5) * cell;
                let y = side / 2.0 - (r as f64 + 1.5) * cell;
                let want = if get_bit(code, 4, r, c) { palette.white } else { palette.black };
                assert_eq!(marker_bit_at(&book, code, side, x, y, &palette), want, "id {id} cell {r},{c}");
            }
        }
    }

    #[test]
    fn facing_origin_orientation() {
        let pose = PoseSpec::facing_origin([2.0, 0.0, 0.0]).to_pose();
        let r = pose.rotation;
        assert!((r.column(2) - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((r.column(1) - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((r.column(0) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ground_truth_matches_pose_and_plane() {
        let mut scene = single_marker_scene(3, "lfm4x4_16", 0.172, 2.0);
        scene.lidar_pose = PoseSpec { xyz: [0.1, -0.2, 0.05], rpy_deg: [2.0, -3.0, 5.0] };
        let model = LidarModel::grid_deg(ScanKind::SolidStateGrid, 0.05, 0.05, 10.0, 10.0);
        let (_, truth) = generate_scan(&scene, &model, 1).unwrap();
        let to_lidar = truth.world_to_lidar();
        let world = world_vertices(&scene)[&3];
        let got = truth.marker(3).unwrap();
        for (w, l) in world.iter().zip(&got.vertices) {
            assert!((to_lidar.transform(w) - Vector3::from(*l)).norm() < 1e-12);
        }
        let v = got.vertices.map(Vector3::from);
        let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
        assert!((v[3] - v[0]).dot(&n).abs() < 1e-12);
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let scene = single_marker_scene(1, "lfm4x4_16", 0.172, 2.0);
        let mut model = LidarModel::grid_deg(ScanKind::SolidStateGrid, 0.1, 0.1, 8.0, 8.0);
        model.jitter_sigma = 1e-4;
        model.range_noise_sigma = 0.002;
        model.dropout_rate = 0.1;
        model.intensity_noise_sigma = 0.02;
        let a = generate_scan(&scene, &model, 9).unwrap().0;
        let b = generate_scan(&scene, &model, 9).unwrap().0;
        let c = generate_scan(&scene, &model, 10).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scene_json_round_trip_and_validation() {
        let scene = single_marker_scene(1, "lfm4x4_16", 0.172, 2.0);
        let text = serde_json::to_string(&scene).unwrap();
        assert_eq!(Scene::from_json(&text).unwrap(), scene);
        let bad = text.replace("0.172", "-0.172");
        assert!(Scene::from_json(&bad).is_err());
    }
}
