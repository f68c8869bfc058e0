//! Direct image-space marker rendering, for tests and fixtures.

use super::codebook::{get_bit, Codebook};
use crate::error::{Error, Result};
use crate::preprocess::BinaryImage;
use crate::projection::Pixel2D;

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub px_per_cell: usize,
    /// White margin around the marker, in cells.
    pub quiet_cells: usize,
    /// Counter-clockwise quarter turns applied to the finished image.
    pub quarter_turns: usize,
    /// Payload cells (row, col) to invert.
    pub flip_payload_bits: Vec<(usize, usize)>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { px_per_cell: 10, quiet_cells: 2, quarter_turns: 0, flip_payload_bits: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: BinaryImage,
    /// True outer corners, indexed top-left, bottom-left, bottom-right,
    /// top-right in the marker's own frame.
    pub corners: [Pixel2D; 4],
}

/// Whether cell (row, col) of the full marker grid is white.
pub fn cell_is_white(book: &Codebook, code: u64, row: usize, col: usize) -> bool {
    let (b, g) = (book.border(), book.grid());
    if row < b || col < b || row >= b + g || col >= b + g {
        return false;
    }
    get_bit(code, g, row - b, col - b)
}

pub fn render_marker(book: &Codebook, id: u32, opts: &RenderOptions) -> Result<Rendered> {
    let code = book.code(id).ok_or_else(|| Error::Config(format!("id {id} not in {}", book.family())))?;
    if opts.px_per_cell == 0 {
        return Err(Error::Config("px_per_cell must be positive".into()));
    }
    let n = book.cells_per_side();
    let side = n * opts.px_per_cell;
    let margin = opts.quiet_cells * opts.px_per_cell;
    let size = side + 2 * margin;
    let image = BinaryImage::from_fn(size, size, |u, v| {
        if u < margin || v < margin || u >= margin + side || v >= margin + side {
            return true;
        }
        let (row, col) = ((v - margin) / opts.px_per_cell, (u - margin) / opts.px_per_cell);
        let flip = opts
            .flip_payload_bits
            .iter()
            .any(|&(r, c)| r + book.border() == row && c + book.border() == col);
        cell_is_white(book, code, row, col) ^ flip
    });
    let (lo, hi) = (margin as f64 - 0.5, (margin + side) as f64 - 0.5);
    let mut corners = [Pixel2D::new(lo, lo), Pixel2D::new(lo, hi), Pixel2D::new(hi, hi), Pixel2D::new(hi, lo)];
    let mut image = image;
    for _ in 0..opts.quarter_turns % 4 {
        let w = image.width();
        corners = corners.map(|c| Pixel2D::new(c.v, (w - 1) as f64 - c.u));
        image = rotate_ccw(&image);
    }
    Ok(Rendered { image, corners })
}

/// Quarter turn counter-clockwise: pixel (u, v) moves to (v, W - 1 - u).
pub fn rotate_ccw(img: &BinaryImage) -> BinaryImage {
    let w = img.width();
    BinaryImage::from_fn(img.height(), w, |u, v| img.get(w - 1 - v, u))
}

/// Paste renders side by side on a white canvas, `columns` per row.
pub fn tile(renders: &[Rendered], columns: usize) -> (BinaryImage, Vec<[Pixel2D; 4]>) {
    let cw = renders.iter().map(|r| r.image.width()).max().unwrap_or(1);
    let ch = renders.iter().map(|r| r.image.height()).max().unwrap_or(1);
    let columns = columns.max(1);
    let rows = renders.len().div_ceil(columns).max(1);
    let mut canvas = BinaryImage::from_fn(cw * columns + 2, ch * rows + 2, |_, _| true);
    let mut corners = Vec::with_capacity(renders.len());
    for (k, r) in renders.iter().enumerate() {
        let (ou, ov) = (1 + (k % columns) * cw, 1 + (k / columns) * ch);
        for v in 0..r.image.height() {
            for u in 0..r.image.width() {
                canvas.set(ou + u, ov + v, r.image.get(u, v));
            }
        }
        corners.push(r.corners.map(|c| Pixel2D::new(c.u + ou as f64, c.v + ov as f64)));
    }
    (canvas, corners)
}
