use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::codebook::{rotations, Codebook};
use super::quad::Quad;
use super::{Detection2D, DetectorParams};
use crate::preprocess::BinaryImage;
use crate::projection::Pixel2D;

/// Why a quad did not decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    DegenerateHomography,
    OutsideImage,
    Border { errors: usize },
    NoCode { best: u32 },
    Ambiguous,
}

/// Projective map from the unit square (x right, y down) onto a quad.
#[derive(Debug, Clone, Copy)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    /// `corners` are the images of (0,0), (0,1), (1,1), (1,0).
    pub fn from_unit_square(corners: &[Pixel2D; 4]) -> Option<Self> {
        let src = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)];
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for (k, ((x, y), p)) in src.into_iter().zip(corners).enumerate() {
            let (u, v) = (p.u, p.v);
            let r = 2 * k;
            a.set_row(r, &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u]));
            a.set_row(r + 1, &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v]));
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a.lu().solve(&b)?;
        if h.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Self(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0)))
    }

    pub fn apply(&self, x: f64, y: f64) -> Pixel2D {
        let p = self.0 * Vector3::new(x, y, 1.0);
        Pixel2D::new(p.x / p.z, p.y / p.z)
    }
}

/// Sampled cell colors, row-major over the full marker (border included).
fn sample_cells(img: &BinaryImage, corners: &[Pixel2D; 4], cells: usize) -> Result<Vec<bool>, Rejection> {
    let h = Homography::from_unit_square(corners).ok_or(Rejection::DegenerateHomography)?;
    // Cells narrower than ~2 px read only their center pixel; wider ones vote.
    let cell_px = cell_pixels(corners, cells);
    let spread = 0.45 - 0.5 / cell_px;
    let offsets: &[f64] = if spread >= 0.12 { &[-1.0, 0.0, 1.0] } else { &[0.0] };
    let n = cells as f64;
    let (w, hgt) = (img.width() as i64, img.height() as i64);
    let mut out = Vec::with_capacity(cells * cells);
    for r in 0..cells {
        for col in 0..cells {
            let mut white = 0usize;
            let mut total = 0usize;
            for dy in offsets {
                for dx in offsets {
                    let x = (col as f64 + 0.5 + dx * spread) / n;
                    let y = (r as f64 + 0.5 + dy * spread) / n;
                    let (u, v) = h.apply(x, y).nearest_cell();
                    if u < 0 || v < 0 || u >= w || v >= hgt {
                        return Err(Rejection::OutsideImage);
                    }
                    white += img.get(u as usize, v as usize) as usize;
                    total += 1;
                }
            }
            out.push(2 * white > total);
        }
    }
    Ok(out)
}

/// Best match for one sampling of the quad.
#[derive(Debug, Clone, Copy)]
struct Reading {
    distance: u32,
    id: u32,
    turns: usize,
    second: u32,
}

fn read_code(img: &BinaryImage, corners: &[Pixel2D; 4], book: &Codebook, params: &DetectorParams) -> Result<Reading, Rejection> {
    let grid = book.grid();
    let border = book.border();
    let cells = book.cells_per_side();
    let sampled = sample_cells(img, corners, cells)?;

    let mut border_errors = 0;
    let mut payload = 0u64;
    for r in 0..cells {
        for c in 0..cells {
            let white = sampled[r * cells + c];
            let in_payload = (border..border + grid).contains(&r) && (border..border + grid).contains(&c);
            if in_payload {
                payload = (payload << 1) | white as u64;
            } else if white {
                border_errors += 1;
            }
        }
    }
    if border_errors > params.max_border_errors {
        return Err(Rejection::Border { errors: border_errors });
    }

    let mut best = Reading { distance: u32::MAX, id: 0, turns: 0, second: u32::MAX };
    for &(id, code) in book.codes() {
        for (turns, rotated) in rotations(code, grid).into_iter().enumerate() {
            let d = (rotated ^ payload).count_ones();
            if d < best.distance {
                best = Reading { distance: d, id, turns, second: best.distance };
            } else if d < best.second {
                best.second = d;
            }
        }
    }
    if best.distance > book.max_hamming() {
        return Err(Rejection::NoCode { best: best.distance });
    }
    if best.second <= best.distance {
        return Err(Rejection::Ambiguous);
    }
    Ok(best)
}

/// Smallest side length divided by the number of cells per side.
fn cell_pixels(c: &[Pixel2D; 4], cells: usize) -> f64 {
    let side = |a: usize, b: usize| (c[a].u - c[b].u).hypot(c[a].v - c[b].v);
    [side(0, 1), side(1, 2), side(2, 3), side(3, 0)].into_iter().fold(f64::MAX, f64::min) / cells as f64
}

/// Below this many pixels per cell, binarized edges may sit a large
/// fraction of a cell off and decoding retries shifted edges.
const COARSE_CELL_PX: f64 = 2.0;
const EDGE_SHIFTS: [f64; 3] = [0.0, -0.4, 0.4];

/// The quad with edge `k` (corner k to k+1) moved outward by `shift[k]` pixels.
fn shifted_quad(c: &[Pixel2D; 4], shift: [f64; 4]) -> Option<[Pixel2D; 4]> {
    let center = c.iter().fold((0.0, 0.0), |a, p| (a.0 + p.u / 4.0, a.1 + p.v / 4.0));
    let lines: Vec<((f64, f64), (f64, f64))> = (0..4)
        .map(|k| {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            let d = (b.u - a.u, b.v - a.v);
            let len = d.0.hypot(d.1);
            let mut n = (-d.1 / len, d.0 / len);
            if (a.u - center.0) * n.0 + (a.v - center.1) * n.1 < 0.0 {
                n = (-n.0, -n.1);
            }
            ((a.u + n.0 * shift[k], a.v + n.1 * shift[k]), d)
        })
        .collect();
    let mut out = [Pixel2D::new(0.0, 0.0); 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let ((p, d), (q, e)) = (lines[(i + 3) % 4], lines[i]);
        let den = d.0 * e.1 - d.1 * e.0;
        if den.abs() < 1e-12 {
            return None;
        }
        let t = ((q.0 - p.0) * e.1 - (q.1 - p.1) * e.0) / den;
        *slot = Pixel2D::new(p.0 + t * d.0, p.1 + t * d.1);
    }
    Some(out)
}

/// Decode a candidate quad whose corners are on-screen counter-clockwise.
///
/// Coarse quads that fail to decode are re-read with every combination of
/// edges shifted by +-0.4 px; the reported corners stay those of `quad`.
pub fn decode_quad(
    img: &BinaryImage,
    quad: &Quad,
    book: &Codebook,
    params: &DetectorParams,
) -> Result<Detection2D, Rejection> {
    let first = read_code(img, &quad.corners, book, params);
    let reading = match first {
        Ok(r) => r,
        Err(e) if cell_pixels(&quad.corners, book.cells_per_side()) >= COARSE_CELL_PX => return Err(e),
        Err(e) => {
            let mut best: Option<Reading> = None;
            for code in 1..81usize {
                let shift = [0, 1, 2, 3].map(|k| EDGE_SHIFTS[(code / 3usize.pow(k as u32)) % 3]);
                let Some(corners) = shifted_quad(&quad.corners, shift) else { continue };
                let Ok(r) = read_code(img, &corners, book, params) else { continue };
                // Many trials inflate the false match rate; demand one bit less error.
                if r.distance < book.max_hamming() {
                    let better = best.is_none_or(|b| {
                        (r.distance, b.second - b.distance) < (b.distance, r.second - r.distance)
                    });
                    if better {
                        best = Some(r);
                    }
                }
            }
            best.ok_or(e)?
        }
    };
    // The payload equals the code turned `turns` quarter turns counter-clockwise,
    // so the marker's top-left corner sits `turns` steps along the quad.
    let turns = reading.turns;
    let corners = std::array::from_fn(|i| quad.corners[(i + turns) % 4]);
    Ok(Detection2D {
        id: reading.id,
        family: book.family().to_string(),
        corners,
        hamming: reading.distance,
        decision_margin: (reading.second - reading.distance) as f64,
    })
}
