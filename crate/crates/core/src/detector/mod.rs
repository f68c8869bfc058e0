//! Square fiducial detector operating on binary images.
//!
//! [`find_quads`] proposes quadrilaterals, [`decode_quad`] samples each one
//! through a unit-square homography and matches the payload against a
//! [`Codebook`] in all four orientations. Corners of a [`Detection2D`] are
//! relabelled so index `k` always names the same physical marker corner:
//! 0 top-left, 1 bottom-left, 2 bottom-right, 3 top-right, as seen facing
//! the marker.

pub mod codebook;
pub mod decode;
pub mod quad;
pub mod render;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::BinaryImage;
use crate::projection::Pixel2D;

pub use codebook::Codebook;
pub use decode::{decode_quad, Homography, Rejection};
pub use quad::{find_quads, Quad};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub id: u32,
    pub family: String,
    pub corners: [Pixel2D; 4],
    /// Payload bits corrected.
    pub hamming: u32,
    /// Second-best minus best Hamming distance.
    pub decision_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Smallest accepted quad area in square pixels.
    pub min_area: f64,
    /// Largest accepted `|cos|` of any quad interior angle.
    pub max_cos: f64,
    /// Border cells allowed to read white.
    pub max_border_errors: usize,
    /// Detect in the left-right mirrored image. Spherical intensity images
    /// are mirrored (azimuth grows to the left), so the LiDAR pipeline sets
    /// this; corners are reported in the unmirrored image.
    pub mirrored: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { min_area: 64.0, max_cos: 0.8, max_border_errors: 2, mirrored: false }
    }
}

impl DetectorParams {
    pub fn lidar() -> Self {
        Self { mirrored: true, ..Self::default() }
    }
}

pub fn detect_markers(img: &BinaryImage, book: &Codebook, params: &DetectorParams) -> Vec<Detection2D> {
    if params.mirrored {
        let flipped = img.flipped_horizontal();
        let last = (img.width() - 1) as f64;
        let unmirrored = DetectorParams { mirrored: false, ..*params };
        return detect_markers(&flipped, book, &unmirrored)
            .into_iter()
            .map(|mut d| {
                for c in &mut d.corners {
                    c.u = last - c.u;
                }
                d
            })
            .collect();
    }
    let quads = find_quads(img, params.min_area, params.max_cos);
    let decoded: Vec<Detection2D> =
        quads.par_iter().filter_map(|q| decode_quad(img, q, book, params).ok()).collect();
    merge_duplicates(decoded)
}

/// Keep one detection per id: larger margin, then fewer corrected bits, then
/// earlier in the input. Output is sorted by id.
pub fn merge_duplicates(detections: Vec<Detection2D>) -> Vec<Detection2D> {
    let mut best: Vec<Detection2D> = Vec::new();
    for d in detections {
        match best.iter_mut().find(|b| b.id == d.id) {
            Some(b) => {
                let better = d.decision_margin > b.decision_margin
                    || (d.decision_margin == b.decision_margin && d.hamming < b.hamming);
                if better {
                    *b = d;
                }
            }
            None => best.push(d),
        }
    }
    best.sort_by_key(|d| d.id);
    best
}
