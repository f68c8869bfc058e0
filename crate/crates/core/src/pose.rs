//! Closed-form rigid alignment of matched world and LiDAR vertex sets.
//!
//! The solved transform maps world points into the LiDAR frame,
//! `p_L = R p_W + t`. Rotation comes from the SVD of the cross-covariance of
//! the centred point sets with the usual determinant fix, so the result is
//! always a proper rotation.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features3d::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// Root-mean-square alignment residual in meters.
    pub rmse: f64,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), rmse: 0.0 }
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation, rmse: 0.0 }
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation), rmse: self.rmse }
    }

    /// `self` after `other`: x -> self(other(x)).
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            rmse: 0.0,
        }
    }

    /// Angle of the relative rotation `self^T other`, radians.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

/// Rotation angle of a rotation matrix, robust near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let trace = r.trace();
    (skew.norm() / 2.0).atan2((trace - 1.0) / 2.0)
}

/// Least-squares `R, t` minimizing `sum |R w_j + t - l_j|^2`.
pub fn solve_pose(world: &[Vector3<f64>], lidar: &[Vector3<f64>]) -> Result<Pose> {
    if world.len() != lidar.len() {
        return Err(Error::DegenerateInput(format!(
            "{} world points but {} LiDAR points",
            world.len(),
            lidar.len()
        )));
    }
    let n = world.len();
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    let wc = world.iter().sum::<Vector3<f64>>() / n as f64;
    let lc = lidar.iter().sum::<Vector3<f64>>() / n as f64;

    let centered = Matrix3xX::from_columns(&world.iter().map(|w| w - wc).collect::<Vec<_>>());
    let mut spread = centered.singular_values().as_slice().to_vec();
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] < 1e-12 * spread[0] {
        return Err(Error::DegenerateGeometry(format!(
            "world points are collinear or coincident (singular values {spread:?})"
        )));
    }

    let mut h = Matrix3::zeros();
    for (w, l) in world.iter().zip(lidar) {
        h += (w - wc) * (l - lc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(2);
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = lc - rotation * wc;
    let sq: f64 = world
        .iter()
        .zip(lidar)
        .map(|(w, l)| (rotation * w + translation - l).norm_squared())
        .sum();
    Ok(Pose { rotation, translation, rmse: (sq / n as f64).sqrt() })
}

/// World-frame vertices per marker id, in detection vertex order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerMap {
    entries: BTreeMap<u32, [Vector3<f64>; 4]>,
}

#[derive(Serialize, Deserialize)]
struct MarkerMapFile {
    markers: Vec<MarkerEntryFile>,
}

#[derive(Serialize, Deserialize)]
struct MarkerEntryFile {
    id: u32,
    vertices: [[f64; 3]; 4],
}

impl MarkerMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32, vertices: [Vector3<f64>; 4]) -> Result<()> {
        validate_marker(id, &vertices)?;
        self.entries.insert(id, vertices);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&[Vector3<f64>; 4]> {
        self.entries.get(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MarkerMapFile = serde_json::from_str(text)?;
        let mut map = Self::new();
        for m in file.markers {
            if map.entries.contains_key(&m.id) {
                return Err(Error::Config(format!("marker {} listed twice", m.id)));
            }
            map.insert(m.id, m.vertices.map(Vector3::from))?;
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let file = MarkerMapFile {
            markers: self
                .entries
                .iter()
                .map(|(&id, v)| MarkerEntryFile { id, vertices: v.map(|p| [p.x, p.y, p.z]) })
                .collect(),
        };
        serde_json::to_value(file).expect("marker map serializes")
    }
}

fn validate_marker(id: u32, v: &[Vector3<f64>; 4]) -> Result<()> {
    let bad = |why: &str| Error::Config(format!("marker {id}: {why}"));
    if v.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
        return Err(bad("non-finite vertex"));
    }
    let scale = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).map(|(a, b)| (v[a] - v[b]).norm());
    let (min_d, max_d) = scale.fold((f64::MAX, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if !(min_d > 1e-9 * max_d.max(1e-300)) || max_d == 0.0 {
        return Err(bad("vertices are not pairwise distinct"));
    }
    let normal = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let normal = if normal.norm() > 1e-12 * max_d * max_d {
        normal
    } else {
        (v[2] - v[0]).cross(&(v[3] - v[0]))
    };
    if normal.norm() <= 1e-12 * max_d * max_d {
        return Err(bad("vertices are collinear"));
    }
    let n = normal.normalize();
    if v.iter().any(|p| (p - v[0]).dot(&n).abs() > 1e-6 * max_d) {
        return Err(bad("vertices are not coplanar"));
    }
    Ok(())
}

/// Matched point lists in (marker id, vertex index) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondences {
    pub world: Vec<Vector3<f64>>,
    pub lidar: Vec<Vector3<f64>>,
    pub markers_used: Vec<u32>,
    /// Detected ids absent from the map.
    pub skipped: Vec<u32>,
}

pub fn match_correspondences(map: &MarkerMap, features: &FeatureSet) -> Result<Correspondences> {
    let mut out = Correspondences { world: vec![], lidar: vec![], markers_used: vec![], skipped: vec![] };
    let mut groups: Vec<_> = features.groups.iter().collect();
    groups.sort_by_key(|g| g.marker_id);
    for g in groups {
        let Some(world) = map.get(g.marker_id) else {
            out.skipped.push(g.marker_id);
            continue;
        };
        let mut vertices = g.vertices;
        vertices.sort_by_key(|f| f.vertex_index);
        for f in &vertices {
            out.world.push(world[f.vertex_index]);
            out.lidar.push(f.xyz());
        }
        out.markers_used.push(g.marker_id);
    }
    if out.markers_used.is_empty() {
        return Err(Error::NoCorrespondence);
    }
    Ok(out)
}

/// Translation plus intrinsic Z-Y-X (yaw, pitch, roll) angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseReport {
    pub xyz: [f64; 3],
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// Pitch within 1e-6 rad of +-90 degrees; roll was fixed to 0 and the
    /// remaining rotation folded into yaw.
    pub gimbal_lock: bool,
}

const GIMBAL_TOLERANCE: f64 = 1e-6;

/// `(roll, pitch, yaw, gimbal_lock)` in radians with `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn euler_zyx(r: &Matrix3<f64>) -> (f64, f64, f64, bool) {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    if (pitch.abs() - std::f64::consts::FRAC_PI_2).abs() < GIMBAL_TOLERANCE {
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return (0.0, pitch, yaw, true);
    }
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    (roll, pitch, yaw, false)
}

pub fn rotation_from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    rz * ry * rx
}

pub fn pose_report(pose: &Pose) -> PoseReport {
    let (roll, pitch, yaw, gimbal_lock) = euler_zyx(&pose.rotation);
    PoseReport {
        xyz: [pose.translation.x, pose.translation.y, pose.translation.z],
        roll_deg: roll.to_degrees(),
        pitch_deg: pitch.to_degrees(),
        yaw_deg: yaw.to_degrees(),
        gimbal_lock,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features3d::{Feature3D, FeatureGroup, Provenance};

    fn square() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(-0.1, 0.1, 0.0),
            Vector3::new(-0.1, -0.1, 0.0),
            Vector3::new(0.1, -0.1, 0.0),
            Vector3::new(0.1, 0.1, 0.0),
        ]
    }

    #[test]
    fn identity_and_pure_translation() {
        let w = square();
        let p = solve_pose(&w, &w).unwrap();
        assert!((p.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(p.translation.norm() < 1e-12 && p.rmse < 1e-12);

        let shift = Vector3::new(1.0, 2.0, 3.0);
        let l: Vec<_> = w.iter().map(|x| x + shift).collect();
        let p = solve_pose(&w, &l).unwrap();
        assert!((p.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!((p.translation - shift).norm() < 1e-12 && p.rmse < 1e-12);
    }

    #[test]
    fn too_few_and_collinear_points() {
        let w = square();
        assert!(matches!(solve_pose(&w[..2], &w[..2]), Err(Error::InsufficientPoints(2))));
        let line: Vec<_> = (0..4).map(|k| Vector3::new(k as f64, 2.0 * k as f64, 0.5)).collect();
        assert!(matches!(solve_pose(&line, &line), Err(Error::DegenerateGeometry(_))));
        let same = vec![Vector3::new(1.0, 1.0, 1.0); 3];
        assert!(matches!(solve_pose(&same, &same), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn mirrored_target_still_gives_proper_rotation() {
        let w = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let l: Vec<_> = w.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let pose = solve_pose(&w, &l).unwrap();
        assert!((pose.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(pose.rmse > 0.1);
    }

    #[test]
    fn euler_axis_cases() {
        let (r, p, y, lock) = euler_zyx(&Matrix3::identity());
        assert_eq!((r, p, y, lock), (0.0, 0.0, 0.0, false));
        let rep = pose_report(&Pose::from_parts(rotation_from_euler_zyx(0.0, 0.0, 15f64.to_radians()), Vector3::zeros()));
        assert!((rep.yaw_deg - 15.0).abs() < 1e-12);
        assert!(rep.roll_deg.abs() < 1e-12 && rep.pitch_deg.abs() < 1e-12);
    }

    #[test]
    fn gimbal_lock_folds_roll_into_yaw() {
        for pitch in [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2] {
            let r = rotation_from_euler_zyx(0.3, pitch, 0.5);
            let (roll, p, yaw, lock) = euler_zyx(&r);
            assert!(lock);
            assert_eq!(roll, 0.0);
            let back = rotation_from_euler_zyx(roll, p, yaw);
            assert!((back - r).abs().max() < 1e-9, "pitch {pitch}");
        }
    }

    #[test]
    fn inverse_and_compose() {
        let pose = Pose::from_parts(rotation_from_euler_zyx(0.1, -0.2, 0.3), Vector3::new(1.0, -2.0, 0.5));
        let id = pose.compose(&pose.inverse());
        assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        assert!((pose.rotation_angle_to(&pose)).abs() < 1e-12);
        let quarter = Pose::from_parts(rotation_from_euler_zyx(0.0, 0.0, 1.0), Vector3::zeros());
        assert!((Pose::identity().rotation_angle_to(&quarter) - 1.0).abs() < 1e-12);
    }

    fn group(id: u32) -> FeatureGroup {
        let v = square();
        let f = |k: usize| Feature3D {
            marker_id: id,
            vertex_index: k,
            point: [v[k].x + 2.0, v[k].y, v[k].z],
            provenance: Provenance::Observed,
        };
        FeatureGroup { marker_id: id, vertices: [f(0), f(1), f(2), f(3)], decision_margin: 1.0 }
    }

    fn map_with(ids: &[u32]) -> MarkerMap {
        let mut map = MarkerMap::new();
        let v = square();
        for &id in ids {
            map.insert(id, [v[0], v[1], v[2], v[3]]).unwrap();
        }
        map
    }

    #[test]
    fn correspondences_follow_map() {
        let one = FeatureSet { groups: vec![group(1)] };
        let c = match_correspondences(&map_with(&[1]), &one).unwrap();
        assert_eq!((c.world.len(), c.lidar.len()), (4, 4));

        let three = FeatureSet { groups: vec![group(1), group(2), group(3)] };
        let c = match_correspondences(&map_with(&[1, 3]), &three).unwrap();
        assert_eq!(c.world.len(), 8);
        assert_eq!(c.markers_used, vec![1, 3]);
        assert_eq!(c.skipped, vec![2]);

        assert!(matches!(match_correspondences(&map_with(&[9]), &three), Err(Error::NoCorrespondence)));
    }

    #[test]
    fn marker_map_validation_and_json() {
        let mut map = MarkerMap::new();
        let v = square();
        let mut bent = [v[0], v[1], v[2], v[3]];
        bent[3].z = 0.05;
        assert!(map.insert(0, bent).is_err());
        let line = [0.0, 1.0, 2.0, 3.0].map(|x| Vector3::new(x, 0.0, 0.0));
        assert!(map.insert(0, line).is_err());
        assert!(map.insert(0, [v[0], v[0], v[2], v[3]]).is_err());

        let map = map_with(&[4, 2]);
        let text = serde_json::to_string(&map.to_json_value()).unwrap();
        assert_eq!(MarkerMap::from_json(&text).unwrap(), map);
        assert!(MarkerMap::from_json(r#"{"markers":[{"id":1,"vertices":[[0,0,0],[1,0,0],[1,1,0],[0,1,0]]},{"id":1,"vertices":[[0,0,0],[1,0,0],[1,1,0],[0,1,0]]}]}"#).is_err());
    }
}
