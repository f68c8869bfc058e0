//! Lifting detected 2D corners into the LiDAR frame.
//!
//! A corner whose pixel was scanned is back-projected with its stored range.
//! An unscanned corner is recovered from the nearest pair of scanned pixels
//! symmetric about it in the same column: the ray through the corner bisects
//! the angle between the pair, so on the line through the pair it divides
//! the segment in the ratio of their ranges.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::detector::Detection2D;
use crate::error::{Error, Result};
use crate::pointcloud::PointL;
use crate::projection::{backproject_pixel, IntensityImage};

pub const DEFAULT_SEARCH_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature3D {
    pub marker_id: u32,
    pub vertex_index: usize,
    pub point: [f64; 3],
    pub provenance: Provenance,
}

impl Feature3D {
    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::from(self.point)
    }
}

/// The four vertices of one marker, indexed 0..4.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub marker_id: u32,
    pub vertices: [Feature3D; 4],
    pub decision_margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    /// Sorted by marker id.
    pub groups: Vec<FeatureGroup>,
}

impl FeatureSet {
    pub fn features(&self) -> impl Iterator<Item = &Feature3D> {
        self.groups.iter().flat_map(|g| g.vertices.iter())
    }

    pub fn group(&self, marker_id: u32) -> Option<&FeatureGroup> {
        self.groups.iter().find(|g| g.marker_id == marker_id)
    }
}

/// Point on segment `upper`-`lower` hit by the bisector of the angle they
/// subtend at the origin.
///
/// With `mu = |lower| / |upper|` the result is
/// `mu / (1 + mu) * upper + 1 / (1 + mu) * lower`.
pub fn bisector_point(upper: &Vector3<f64>, lower: &Vector3<f64>) -> Vector3<f64> {
    let mu = lower.norm() / upper.norm();
    upper * (mu / (1.0 + mu)) + lower * (1.0 / (1.0 + mu))
}

/// Estimate the 3D point behind an unobserved pixel.
pub fn interpolate_unobserved(img: &IntensityImage, u: usize, v: usize, search_limit: usize) -> Result<PointL> {
    if u >= img.width() || v >= img.height() {
        return Err(Error::OutOfBounds { u: u as i64, v: v as i64, width: img.width(), height: img.height() });
    }
    if img.is_observed(u, v) {
        return Err(Error::DegenerateInput(format!("pixel ({u}, {v}) is observed")));
    }
    for d in 1..=search_limit {
        if d > v || v + d >= img.height() {
            break;
        }
        let up = backproject_pixel(img, u as i64, (v - d) as i64)?;
        let down = backproject_pixel(img, u as i64, (v + d) as i64)?;
        if let (Some(pu), Some(pd)) = (up, down) {
            let mu = pd.range() / pu.range();
            let p = bisector_point(&pu.xyz(), &pd.xyz());
            let intensity = (mu * pu.intensity + pd.intensity) / (1.0 + mu);
            return Ok(PointL::from_vector(&p, intensity));
        }
    }
    Err(Error::Interpolation { u, v, search_limit })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LiftOutcome {
    Lifted([Feature3D; 4]),
    Discarded { vertex_index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedDetection {
    pub marker_id: u32,
    pub decision_margin: f64,
    pub outcome: LiftOutcome,
}

fn lift_corner(img: &IntensityImage, det: &Detection2D, k: usize, search_limit: usize) -> Result<Feature3D> {
    let (u, v) = det.corners[k].nearest_cell();
    let (point, provenance) = match backproject_pixel(img, u, v)? {
        Some(p) => (p, Provenance::Observed),
        None => (interpolate_unobserved(img, u as usize, v as usize, search_limit)?, Provenance::Interpolated),
    };
    Ok(Feature3D { marker_id: det.id, vertex_index: k, point: [point.x, point.y, point.z], provenance })
}

pub fn lift_detection(img: &IntensityImage, det: &Detection2D, search_limit: usize) -> LiftedDetection {
    let mut lifted = Vec::with_capacity(4);
    for k in 0..4 {
        match lift_corner(img, det, k, search_limit) {
            Ok(f) => lifted.push(f),
            Err(e) => {
                return LiftedDetection {
                    marker_id: det.id,
                    decision_margin: det.decision_margin,
                    outcome: LiftOutcome::Discarded { vertex_index: k, reason: e.to_string() },
                }
            }
        }
    }
    LiftedDetection {
        marker_id: det.id,
        decision_margin: det.decision_margin,
        outcome: LiftOutcome::Lifted([lifted[0], lifted[1], lifted[2], lifted[3]]),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssemblyReport {
    /// (marker id, failing vertex index, reason)
    pub discarded: Vec<(u32, usize, String)>,
    /// Ids seen more than once; the larger decision margin was kept.
    pub conflicts: Vec<u32>,
}

pub fn assemble_feature_set(lifted: Vec<LiftedDetection>) -> Result<(FeatureSet, AssemblyReport)> {
    let mut report = AssemblyReport::default();
    let mut groups: Vec<FeatureGroup> = Vec::new();
    for l in lifted {
        let vertices = match l.outcome {
            LiftOutcome::Lifted(v) => v,
            LiftOutcome::Discarded { vertex_index, reason } => {
                report.discarded.push((l.marker_id, vertex_index, reason));
                continue;
            }
        };
        let group = FeatureGroup { marker_id: l.marker_id, vertices, decision_margin: l.decision_margin };
        match groups.iter_mut().find(|g| g.marker_id == l.marker_id) {
            Some(existing) => {
                if !report.conflicts.contains(&l.marker_id) {
                    report.conflicts.push(l.marker_id);
                }
                if group.decision_margin > existing.decision_margin {
                    *existing = group;
                }
            }
            None => groups.push(group),
        }
    }
    if groups.is_empty() {
        return Err(Error::NoFeatures);
    }
    groups.sort_by_key(|g| g.marker_id);
    Ok((FeatureSet { groups }, report))
}
