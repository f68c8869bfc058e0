//! Debug images: PGM/PBM and PNG encoders for intensity, range and binary images.

use std::path::Path;

use crate::detector::Detection2D;
use crate::error::{Error, Result};
use crate::preprocess::BinaryImage;
use crate::projection::IntensityImage;

/// 8-bit binary PGM of intensity; unobserved cells are 0.
pub fn encode_intensity_pgm(img: &IntensityImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(gray8(img));
    out
}

/// 16-bit binary PGM of range in millimeters, saturating at 65535; unobserved cells are 0.
pub fn encode_range_pgm(img: &IntensityImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    for c in img.cells() {
        let mm = if c.observed { (c.range * 1000.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        out.extend(mm.to_be_bytes());
    }
    out
}

/// Plain-packed PBM; 1 (black) where the binary image is 0.
pub fn encode_pbm(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", img.width(), img.height()).into_bytes();
    let stride = img.width().div_ceil(8);
    for v in 0..img.height() {
        let mut row = vec![0u8; stride];
        for u in 0..img.width() {
            if !img.get(u, v) {
                row[u / 8] |= 0x80 >> (u % 8);
            }
        }
        out.extend(row);
    }
    out
}

fn gray8(img: &IntensityImage) -> impl Iterator<Item = u8> + '_ {
    img.cells().iter().map(|c| if c.observed { (c.intensity.clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 })
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let err = |e: png::EncodingError| Error::DegenerateInput(format!("png encoding: {e}"));
    let mut writer = enc.write_header().map_err(err)?;
    writer.write_image_data(data).map_err(err)?;
    writer.finish().map_err(err)?;
    Ok(out)
}

const UNOBSERVED_RGB: [u8; 3] = [40, 40, 160];

/// Grayscale PNG; with `highlight_unobserved` the output is RGB and
/// unobserved cells are tinted.
pub fn encode_intensity_png(img: &IntensityImage, highlight_unobserved: bool) -> Result<Vec<u8>> {
    if !highlight_unobserved {
        let data: Vec<u8> = gray8(img).collect();
        return encode_png(img.width(), img.height(), png::ColorType::Grayscale, &data);
    }
    let data: Vec<u8> = img
        .cells()
        .iter()
        .zip(gray8(img))
        .flat_map(|(c, g)| if c.observed { [g; 3] } else { UNOBSERVED_RGB })
        .collect();
    encode_png(img.width(), img.height(), png::ColorType::Rgb, &data)
}

pub fn encode_binary_png(img: &BinaryImage) -> Result<Vec<u8>> {
    let data: Vec<u8> = img.bits().iter().map(|&b| if b != 0 { 255 } else { 0 }).collect();
    encode_png(img.width(), img.height(), png::ColorType::Grayscale, &data)
}

const EDGE_RGB: [u8; 3] = [230, 30, 30];
const FIRST_CORNER_RGB: [u8; 3] = [30, 200, 30];
const CORNER_RGB: [u8; 3] = [240, 200, 0];

/// RGB PNG of the binary image with each detection's outline and corners.
/// Corner 0 is drawn in a distinct color.
pub fn encode_annotated_png(img: &BinaryImage, detections: &[Detection2D]) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    let mut rgb: Vec<u8> = img.bits().iter().flat_map(|&b| [if b != 0 { 255 } else { 0 }; 3]).collect();
    let mut put = |u: i64, v: i64, color: [u8; 3]| {
        if u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h {
            let k = 3 * (v as usize * w + u as usize);
            rgb[k..k + 3].copy_from_slice(&color);
        }
    };
    for d in detections {
        for k in 0..4 {
            let (a, b) = (d.corners[k], d.corners[(k + 1) % 4]);
            let steps = (b.u - a.u).abs().max((b.v - a.v).abs()).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                put((a.u + t * (b.u - a.u)).round() as i64, (a.v + t * (b.v - a.v)).round() as i64, EDGE_RGB);
            }
        }
        for (k, c) in d.corners.iter().enumerate() {
            let color = if k == 0 { FIRST_CORNER_RGB } else { CORNER_RGB };
            let (cu, cv) = c.nearest_cell();
            for dv in -1..=1 {
                for du in -1..=1 {
                    put(cu + du, cv + dv, color);
                }
            }
        }
    }
    encode_png(w, h, png::ColorType::Rgb, &rgb)
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{Cell, ProjectionConfig};

    fn tiny() -> IntensityImage {
        let cfg = ProjectionConfig::new(0.01, 0.01, 0, 0, 2, 2).unwrap();
        let cells = vec![
            Cell { intensity: 1.0, range: 2.0, observed: true },
            Cell::UNOBSERVED,
            Cell { intensity: 0.5, range: 70.0, observed: true },
            Cell { intensity: 0.0, range: 0.0015, observed: true },
        ];
        IntensityImage::from_cells(cfg, cells).unwrap()
    }

    #[test]
    fn pgm_layouts() {
        let img = tiny();
        let pgm = encode_intensity_pgm(&img);
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 4..], &[255, 0, 128, 0]);
        let range = encode_range_pgm(&img);
        let body = &range[range.len() - 8..];
        assert_eq!(body, &[0x07, 0xD0, 0, 0, 0xFF, 0xFF, 0, 2]);
    }

    #[test]
    fn pbm_packs_black_bits() {
        let img = BinaryImage::from_fn(10, 1, |u, _| u % 2 == 0);
        let pbm = encode_pbm(&img);
        assert_eq!(&pbm[pbm.len() - 2..], &[0b0101_0101, 0b0100_0000]);
    }

    #[test]
    fn png_decodes_back() {
        let png_bytes = encode_intensity_png(&tiny(), false).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(png_bytes));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (2, 2));
        assert_eq!(&buf[..4], &[255, 0, 128, 0]);
        assert!(encode_intensity_png(&tiny(), true).is_ok());
    }
}
