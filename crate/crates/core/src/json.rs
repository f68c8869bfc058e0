//! Deterministic JSON records. Every float is rounded to 9 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::detector::Detection2D;
use crate::features3d::FeatureSet;
use crate::pose::{pose_report, Correspondences, Pose};

pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Round every non-integer number in `v`.
pub fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().and_then(|x| Number::from_f64(round_sig9(x))).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

pub fn to_value(record: &impl Serialize) -> Value {
    rounded(serde_json::to_value(record).expect("records serialize"))
}

pub fn to_string_pretty(record: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(record)).expect("values serialize");
    s.push('\n');
    s
}

pub fn detections_value(dets: &[Detection2D]) -> Value {
    let records: Vec<Value> = dets
        .iter()
        .map(|d| {
            serde_json::json!({
                "id": d.id,
                "family": d.family,
                "corners": d.corners.map(|c| [c.u, c.v]),
                "hamming": d.hamming,
                "decision_margin": d.decision_margin,
            })
        })
        .collect();
    rounded(Value::Array(records))
}

pub fn features_value(features: &FeatureSet) -> Value {
    to_value(&features.features().collect::<Vec<_>>())
}

fn matrix_rows(pose: &Pose) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| pose.rotation[(r, c)]))
}

/// `R`, `t` map world points into the LiDAR frame; `xyz` and `rpy_deg`
/// describe the LiDAR in the world frame.
pub fn pose_value(pose: &Pose, corr: &Correspondences) -> Value {
    let lidar_in_world = pose_report(&pose.inverse());
    rounded(serde_json::json!({
        "R": matrix_rows(pose),
        "t": [pose.translation.x, pose.translation.y, pose.translation.z],
        "rmse": pose.rmse,
        "xyz": lidar_in_world.xyz,
        "rpy_deg": [lidar_in_world.roll_deg, lidar_in_world.pitch_deg, lidar_in_world.yaw_deg],
        "gimbal_lock": lidar_in_world.gimbal_lock,
        "n_points": corr.world.len(),
        "markers_used": corr.markers_used,
        "markers_skipped": corr.skipped,
    }))
}
