//! Point model and cloud file I/O.
//!
//! Supported on input: PCD v0.7 (`ascii` and `binary`), PLY ascii, and CSV.
//! Output writes single-precision `x y z intensity` records.
//!
//! Intensities are normalized to `[0, 1]` at load time:
//! a declared maximum (`# intensity_max N` in PCD, `comment intensity_max N`
//! in PLY) divides every value; otherwise integer-typed intensities are
//! divided by 255; floating intensities are clamped.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INTENSITY_ALIASES: [&str; 3] = ["intensity", "i", "reflectance"];
const INTENSITY_MAX_KEY: &str = "intensity_max";

/// One LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointL {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Reflectance in `[0, 1]`.
    pub intensity: f64,
}

impl PointL {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn from_vector(p: &Vector3<f64>, intensity: f64) -> Self {
        Self::new(p.x, p.y, p.z, intensity)
    }

    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.range() > 0.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<PointL>,
    pub source_meta: Option<String>,
}

impl PointCloud {
    pub fn new(points: Vec<PointL>) -> Self {
        Self { points, source_meta: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudFormat {
    PcdAscii,
    PcdBinary,
    PlyAscii,
    Csv,
}

impl CloudFormat {
    /// Guess from a file extension. `.pcd` maps to binary; the PCD reader
    /// accepts either encoding regardless.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pcd" => Some(CloudFormat::PcdBinary),
            "ply" => Some(CloudFormat::PlyAscii),
            "csv" | "txt" => Some(CloudFormat::Csv),
            _ => None,
        }
    }
}

/// What happened to the raw records during [`load_cloud`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    pub dropped_zero_range: usize,
    pub dropped_non_finite: usize,
    /// Intensities moved by clamping into `[0, 1]`.
    pub clamped: usize,
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<(PointCloud, LoadReport)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (mut cloud, report) = parse_cloud(&bytes, format)?;
    cloud.source_meta = Some(path.display().to_string());
    Ok((cloud, report))
}

/// Parse an in-memory cloud file.
pub fn parse_cloud(bytes: &[u8], format: CloudFormat) -> Result<(PointCloud, LoadReport)> {
    let raw = match format {
        CloudFormat::PcdAscii | CloudFormat::PcdBinary => parse_pcd(bytes)?,
        CloudFormat::PlyAscii => parse_ply(bytes)?,
        CloudFormat::Csv => parse_csv(bytes)?,
    };
    raw.finish()
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cloud(cloud, format)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat) -> Result<Vec<u8>> {
    cloud.ensure_non_empty()?;
    let n = cloud.points.len();
    let mut out = String::new();
    match format {
        CloudFormat::PcdAscii | CloudFormat::PcdBinary => {
            let data = if format == CloudFormat::PcdAscii { "ascii" } else { "binary" };
            let _ = write!(
                out,
                "# .PCD v0.7 - Point Cloud Data file format\n\
                 VERSION 0.7\n\
                 FIELDS x y z intensity\n\
                 SIZE 4 4 4 4\n\
                 TYPE F F F F\n\
                 COUNT 1 1 1 1\n\
                 WIDTH {n}\n\
                 HEIGHT 1\n\
                 VIEWPOINT 0 0 0 1 0 0 0\n\
                 POINTS {n}\n\
                 DATA {data}\n"
            );
            if format == CloudFormat::PcdBinary {
                let mut bytes = out.into_bytes();
                bytes.reserve(n * 16);
                for p in &cloud.points {
                    for v in [p.x, p.y, p.z, p.intensity] {
                        bytes.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
                return Ok(bytes);
            }
            for p in &cloud.points {
                let _ = writeln!(
                    out,
                    "{} {} {} {}",
                    p.x as f32, p.y as f32, p.z as f32, p.intensity as f32
                );
            }
        }
        CloudFormat::PlyAscii => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {n}\n\
                 property float x\nproperty float y\nproperty float z\n\
                 property float intensity\nend_header\n"
            );
            for p in &cloud.points {
                let _ = writeln!(
                    out,
                    "{:?} {:?} {:?} {:?}",
                    p.x as f32, p.y as f32, p.z as f32, p.intensity as f32
                );
            }
        }
        CloudFormat::Csv => {
            out.push_str("x,y,z,intensity\n");
            for p in &cloud.points {
                let _ = writeln!(out, "{:?},{:?},{:?},{:?}", p.x, p.y, p.z, p.intensity);
            }
        }
    }
    Ok(out.into_bytes())
}

/// Records as read from a file, before normalization.
struct RawCloud {
    xyz: Vec<[f64; 3]>,
    intensity: Vec<f64>,
    integer_intensity: bool,
    declared_max: Option<f64>,
}

impl RawCloud {
    fn new(integer_intensity: bool, declared_max: Option<f64>) -> Self {
        Self { xyz: Vec::new(), intensity: Vec::new(), integer_intensity, declared_max }
    }

    fn push(&mut self, xyz: [f64; 3], intensity: f64) {
        self.xyz.push(xyz);
        self.intensity.push(intensity);
    }

    fn finish(self) -> Result<(PointCloud, LoadReport)> {
        let scale = match self.declared_max {
            Some(m) => 1.0 / m,
            None if self.integer_intensity => 1.0 / 255.0,
            None => 1.0,
        };
        let mut report = LoadReport { records: self.xyz.len(), ..Default::default() };
        let mut points = Vec::with_capacity(self.xyz.len());
        for ([x, y, z], raw) in self.xyz.into_iter().zip(self.intensity) {
            let scaled = raw * scale;
            let intensity = if scaled.is_nan() { 0.0 } else { scaled.clamp(0.0, 1.0) };
            let p = PointL::new(x, y, z, intensity);
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                report.dropped_non_finite += 1;
                continue;
            }
            if !p.is_valid() {
                report.dropped_zero_range += 1;
                continue;
            }
            if intensity != scaled {
                report.clamped += 1;
            }
            points.push(p);
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok((PointCloud::new(points), report))
    }
}

fn parse_declared_max(value: &str, line: usize) -> Result<f64> {
    match value.trim().parse::<f64>() {
        Ok(m) if m.is_finite() && m > 0.0 => Ok(m),
        _ => Err(Error::format_at_line(line, format!("bad {INTENSITY_MAX_KEY} value {value:?}"))),
    }
}

fn find_intensity(names: &[&str]) -> Option<usize> {
    INTENSITY_ALIASES
        .iter()
        .find_map(|alias| names.iter().position(|n| n.eq_ignore_ascii_case(alias)))
}

fn find_xyz(names: &[&str]) -> Result<[usize; 3]> {
    let mut idx = [0; 3];
    for (slot, axis) in idx.iter_mut().zip(["x", "y", "z"]) {
        *slot = names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(axis))
            .ok_or_else(|| Error::format(format!("missing field {axis}")))?;
    }
    Ok(idx)
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::format_at_line(line, format!("cannot parse {token:?} as a number")))
}

/// Single-precision fields go through `f32` so text and binary encodings of
/// the same file agree.
fn parse_field(token: &str, line: usize, single: bool) -> Result<f64> {
    if !single {
        return parse_number(token, line);
    }
    token
        .parse::<f32>()
        .map(f64::from)
        .map_err(|_| Error::format_at_line(line, format!("cannot parse {token:?} as a number")))
}

/// Split into lines, keeping 1-based numbers and the byte offset after each.
fn lines_with_offsets(bytes: &[u8]) -> impl Iterator<Item = (usize, &[u8], usize)> {
    let mut start = 0usize;
    let mut number = 0usize;
    std::iter::from_fn(move || {
        if start >= bytes.len() {
            return None;
        }
        let rest = &bytes[start..];
        let (line, next) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], start + i + 1),
            None => (rest, bytes.len()),
        };
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        start = next;
        number += 1;
        Some((number, line, next))
    })
}

fn utf8_line(line: &[u8], number: usize) -> Result<&str> {
    std::str::from_utf8(line).map_err(|_| Error::format_at_line(number, "invalid UTF-8"))
}

// ---------------------------------------------------------------------------
// PCD

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    Float,
    Signed,
    Unsigned,
}

#[derive(Debug, Clone)]
struct PcdField {
    name: String,
    size: usize,
    kind: ScalarKind,
    count: usize,
}

fn parse_pcd(bytes: &[u8]) -> Result<RawCloud> {
    let mut names: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut kinds: Vec<ScalarKind> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    let mut height: Option<usize> = None;
    let mut points: Option<usize> = None;
    let mut declared_max = None;
    let mut data: Option<(String, usize, usize)> = None;

    for (number, raw, next) in lines_with_offsets(bytes) {
        let line = utf8_line(raw, number)?.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            if parts.next() == Some(INTENSITY_MAX_KEY) {
                declared_max = Some(parse_declared_max(parts.next().unwrap_or(""), number)?);
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("").to_ascii_uppercase();
        let values: Vec<&str> = parts.collect();
        let parse_usizes = |vals: &[&str]| -> Result<Vec<usize>> {
            vals.iter()
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::format_at_line(number, format!("bad integer {v:?}")))
                })
                .collect()
        };
        let single = |vals: &[&str]| -> Result<usize> {
            match parse_usizes(vals)?.as_slice() {
                [v] => Ok(*v),
                _ => Err(Error::format_at_line(number, format!("{key} expects one value"))),
            }
        };
        match key.as_str() {
            "VERSION" | "VIEWPOINT" => {}
            "FIELDS" => names = values.iter().map(|s| s.to_string()).collect(),
            "SIZE" => sizes = parse_usizes(&values)?,
            "COUNT" => counts = parse_usizes(&values)?,
            "TYPE" => {
                kinds = values
                    .iter()
                    .map(|t| match *t {
                        "F" | "f" => Ok(ScalarKind::Float),
                        "I" | "i" => Ok(ScalarKind::Signed),
                        "U" | "u" => Ok(ScalarKind::Unsigned),
                        other => Err(Error::format_at_line(number, format!("unknown TYPE {other:?}"))),
                    })
                    .collect::<Result<_>>()?
            }
            "WIDTH" => width = Some(single(&values)?),
            "HEIGHT" => height = Some(single(&values)?),
            "POINTS" => points = Some(single(&values)?),
            "DATA" => {
                let mode = values.first().copied().unwrap_or("").to_ascii_lowercase();
                data = Some((mode, next, number));
                break;
            }
            other => {
                return Err(Error::format_at_line(number, format!("unknown header key {other:?}")))
            }
        }
    }

    let (mode, data_offset, data_line) =
        data.ok_or_else(|| Error::format("PCD header has no DATA line"))?;
    if names.is_empty() {
        return Err(Error::format("PCD header has no FIELDS line"));
    }
    let nf = names.len();
    if counts.is_empty() {
        counts = vec![1; nf];
    }
    if sizes.len() != nf || kinds.len() != nf || counts.len() != nf {
        return Err(Error::format("PCD FIELDS, SIZE, TYPE and COUNT lengths disagree"));
    }
    let fields: Vec<PcdField> = (0..nf)
        .map(|k| PcdField { name: names[k].clone(), size: sizes[k], kind: kinds[k], count: counts[k] })
        .collect();
    for f in &fields {
        let ok = match f.kind {
            ScalarKind::Float => matches!(f.size, 4 | 8),
            _ => matches!(f.size, 1 | 2 | 4 | 8),
        };
        if !ok || f.count == 0 {
            return Err(Error::format(format!("unsupported layout for field {}", f.name)));
        }
    }
    let name_refs: Vec<&str> = fields.iter().map(|f| f.name.as_str()).collect();
    let xyz_idx = find_xyz(&name_refs)?;
    let i_idx = find_intensity(&name_refs).ok_or_else(|| Error::format("missing intensity field"))?;
    let n_points = match (points, width, height) {
        (Some(p), _, _) => p,
        (None, Some(w), Some(h)) => w
            .checked_mul(h)
            .ok_or_else(|| Error::format("WIDTH*HEIGHT overflows"))?,
        (None, Some(w), None) => w,
        _ => return Err(Error::format("PCD header gives no point count")),
    };

    let integer = fields[i_idx].kind != ScalarKind::Float;
    let mut raw = RawCloud::new(integer, declared_max);
    // Offsets of the first scalar of each field, in tokens (ascii) or bytes (binary).
    let token_offsets: Vec<usize> = fields
        .iter()
        .scan(0usize, |acc, f| {
            let here = *acc;
            *acc += f.count;
            Some(here)
        })
        .collect();
    let wanted = [xyz_idx[0], xyz_idx[1], xyz_idx[2], i_idx];

    match mode.as_str() {
        "ascii" => {
            let total_tokens: usize = fields.iter().map(|f| f.count).sum();
            let body = &bytes[data_offset.min(bytes.len())..];
            for (k, line, _) in lines_with_offsets(body) {
                let number = data_line + k;
                let text = utf8_line(line, number)?.trim();
                if text.is_empty() {
                    continue;
                }
                if raw.xyz.len() == n_points {
                    return Err(Error::format_at_line(number, "more records than POINTS"));
                }
                let tokens: Vec<&str> = text.split_whitespace().collect();
                if tokens.len() != total_tokens {
                    return Err(Error::format_at_line(
                        number,
                        format!("expected {total_tokens} values, found {}", tokens.len()),
                    ));
                }
                let mut vals = [0.0; 4];
                for (slot, &fi) in vals.iter_mut().zip(&wanted) {
                    let single = fields[fi].kind == ScalarKind::Float && fields[fi].size == 4;
                    *slot = parse_field(tokens[token_offsets[fi]], number, single)?;
                }
                raw.push([vals[0], vals[1], vals[2]], vals[3]);
            }
            if raw.xyz.len() != n_points {
                return Err(Error::format(format!(
                    "POINTS declares {n_points} records, found {}",
                    raw.xyz.len()
                )));
            }
        }
        "binary" => {
            let record: usize = fields
                .iter()
                .try_fold(0usize, |acc, f| acc.checked_add(f.size.checked_mul(f.count)?))
                .ok_or_else(|| Error::format("record size overflows"))?;
            let byte_offsets: Vec<usize> = fields
                .iter()
                .scan(0usize, |acc, f| {
                    let here = *acc;
                    *acc += f.size * f.count;
                    Some(here)
                })
                .collect();
            let needed = n_points
                .checked_mul(record)
                .and_then(|b| b.checked_add(data_offset))
                .ok_or_else(|| Error::format("data size overflows"))?;
            if bytes.len() < needed {
                return Err(Error::format_at_byte(
                    bytes.len(),
                    format!("binary payload truncated: need {needed} bytes"),
                ));
            }
            for k in 0..n_points {
                let base = data_offset + k * record;
                let mut vals = [0.0; 4];
                for (slot, &fi) in vals.iter_mut().zip(&wanted) {
                    let f = &fields[fi];
                    let at = base + byte_offsets[fi];
                    *slot = decode_scalar(&bytes[at..at + f.size], f.kind);
                }
                raw.push([vals[0], vals[1], vals[2]], vals[3]);
            }
        }
        other => return Err(Error::format_at_line(data_line, format!("unsupported DATA mode {other:?}"))),
    }
    Ok(raw)
}

fn decode_scalar(b: &[u8], kind: ScalarKind) -> f64 {
    match (kind, b.len()) {
        (ScalarKind::Float, 4) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (ScalarKind::Float, _) => f64::from_le_bytes(b.try_into().unwrap_or([0; 8])),
        (ScalarKind::Signed, 1) => b[0] as i8 as f64,
        (ScalarKind::Signed, 2) => i16::from_le_bytes([b[0], b[1]]) as f64,
        (ScalarKind::Signed, 4) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (ScalarKind::Signed, _) => i64::from_le_bytes(b.try_into().unwrap_or([0; 8])) as f64,
        (ScalarKind::Unsigned, 1) => b[0] as f64,
        (ScalarKind::Unsigned, 2) => u16::from_le_bytes([b[0], b[1]]) as f64,
        (ScalarKind::Unsigned, 4) => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (ScalarKind::Unsigned, _) => u64::from_le_bytes(b.try_into().unwrap_or([0; 8])) as f64,
    }
}

// ---------------------------------------------------------------------------
// PLY

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarKind)>,
    /// Per property: declared as a 4-byte float.
    single: Vec<bool>,
}

fn ply_kind(t: &str) -> Option<ScalarKind> {
    Some(match t {
        "float" | "double" | "float32" | "float64" => ScalarKind::Float,
        "char" | "short" | "int" | "int8" | "int16" | "int32" => ScalarKind::Signed,
        "uchar" | "ushort" | "uint" | "uint8" | "uint16" | "uint32" => ScalarKind::Unsigned,
        _ => return None,
    })
}

fn parse_ply(bytes: &[u8]) -> Result<RawCloud> {
    let mut lines = lines_with_offsets(bytes);
    match lines.next() {
        Some((_, l, _)) if l.trim_ascii() == b"ply" => {}
        _ => return Err(Error::format_at_line(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut declared_max = None;
    let mut header_done = false;
    let mut format_seen = false;
    let mut last_line = 1;
    for (number, raw, _) in lines.by_ref() {
        last_line = number;
        let line = utf8_line(raw, number)?.trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            None => continue,
            Some("format") => {
                if parts.next() != Some("ascii") {
                    return Err(Error::format_at_line(number, "only ascii PLY is supported"));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {
                if parts.next() == Some(INTENSITY_MAX_KEY) {
                    declared_max = Some(parse_declared_max(parts.next().unwrap_or(""), number)?);
                }
            }
            Some("element") => {
                let name = parts.next().unwrap_or("").to_string();
                let count = parts
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::format_at_line(number, "bad element count"))?;
                elements.push(PlyElement { name, count, properties: Vec::new(), single: Vec::new() });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::format_at_line(number, "property before element"))?;
                let ty = parts.next().unwrap_or("");
                if ty == "list" {
                    if element.name == "vertex" {
                        return Err(Error::format_at_line(number, "list property on vertex"));
                    }
                    // Only the vertex element is decoded; other rows are skipped whole.
                    element.properties.push(("list".into(), ScalarKind::Signed));
                    element.single.push(false);
                    continue;
                }
                let kind = ply_kind(ty)
                    .ok_or_else(|| Error::format_at_line(number, format!("unknown type {ty:?}")))?;
                let name = parts.next().unwrap_or("").to_string();
                element.properties.push((name, kind));
                element.single.push(matches!(ty, "float" | "float32"));
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => {
                return Err(Error::format_at_line(number, format!("unknown header line {other:?}")))
            }
        }
    }
    if !header_done || !format_seen {
        return Err(Error::format_at_line(last_line, "incomplete PLY header"));
    }
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format("no vertex element"))?;
    let vertex = &elements[vertex_pos];
    let names: Vec<&str> = vertex.properties.iter().map(|(n, _)| n.as_str()).collect();
    let xyz = find_xyz(&names)?;
    let ii = find_intensity(&names).ok_or_else(|| Error::format("missing intensity field"))?;
    let mut raw = RawCloud::new(vertex.properties[ii].1 != ScalarKind::Float, declared_max);
    let skip: usize = elements[..vertex_pos].iter().map(|e| e.count).sum();

    let mut skipped = 0usize;
    for (number, line, _) in lines {
        let text = utf8_line(line, number)?.trim();
        if text.is_empty() {
            continue;
        }
        if skipped < skip {
            skipped += 1;
            continue;
        }
        if raw.xyz.len() == vertex.count {
            break;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != vertex.properties.len() {
            return Err(Error::format_at_line(
                number,
                format!("expected {} values, found {}", vertex.properties.len(), tokens.len()),
            ));
        }
        let field = |k: usize| parse_field(tokens[k], number, vertex.single[k]);
        let (x, y, z, i) = (field(xyz[0])?, field(xyz[1])?, field(xyz[2])?, field(ii)?);
        raw.push([x, y, z], i);
    }
    if raw.xyz.len() != vertex.count {
        return Err(Error::format(format!(
            "vertex element declares {} records, found {}",
            vertex.count,
            raw.xyz.len()
        )));
    }
    Ok(raw)
}

// ---------------------------------------------------------------------------
// CSV

fn is_integer_literal(token: &str) -> bool {
    let digits = token.strip_prefix(['-', '+']).unwrap_or(token);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn parse_csv(bytes: &[u8]) -> Result<RawCloud> {
    let mut columns: Option<([usize; 3], usize)> = None;
    let mut rows: Vec<([f64; 3], f64)> = Vec::new();
    let mut all_integer = true;
    let mut first = true;
    for (number, line, _) in lines_with_offsets(bytes) {
        let text = utf8_line(line, number)?.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = text.split(',').map(str::trim).collect();
        if first {
            first = false;
            if tokens.first().is_some_and(|t| t.parse::<f64>().is_err()) {
                let xyz = find_xyz(&tokens).map_err(|e| match e {
                    Error::Format { message, .. } => Error::format_at_line(number, message),
                    other => other,
                })?;
                let i = find_intensity(&tokens)
                    .ok_or_else(|| Error::format_at_line(number, "missing intensity field"))?;
                columns = Some((xyz, i));
                continue;
            }
        }
        let ([xi, yi, zi], ii) = columns.unwrap_or(([0, 1, 2], 3));
        let needed = xi.max(yi).max(zi).max(ii) + 1;
        if tokens.len() < needed {
            return Err(Error::format_at_line(
                number,
                format!("expected at least {needed} columns, found {}", tokens.len()),
            ));
        }
        all_integer &= is_integer_literal(tokens[ii]);
        rows.push((
            [
                parse_number(tokens[xi], number)?,
                parse_number(tokens[yi], number)?,
                parse_number(tokens[zi], number)?,
            ],
            parse_number(tokens[ii], number)?,
        ));
    }
    let mut raw = RawCloud::new(all_integer && !rows.is_empty(), None);
    for (xyz, i) in rows {
        raw.push(xyz, i);
    }
    Ok(raw)
}
