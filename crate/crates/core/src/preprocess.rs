//! Intensity image to binary image.
//!
//! Unobserved cells read as intensity 0. The grayscale values are optionally
//! smoothed with a sampled Gaussian (reflect-101 borders), then binarized with
//! one global threshold.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::IntensityImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    /// Bit is 1 iff the (blurred) intensity is at least this value.
    pub threshold: f64,
    /// Pixels; 0 disables the blur.
    pub blur_sigma: f64,
    /// Odd kernel width, at least 3 when the blur is on.
    pub blur_kernel: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self { threshold: LidarPreset::Custom.default_threshold(), blur_sigma: 0.0, blur_kernel: 5 }
    }
}

impl PreprocessParams {
    pub fn with_threshold(threshold: f64) -> Self {
        Self { threshold, ..Self::default() }
    }

    pub fn blur_enabled(&self) -> bool {
        self.blur_sigma > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} is not in (0, 1)", self.threshold)));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::Config(format!("blur sigma {} is invalid", self.blur_sigma)));
        }
        if self.blur_enabled() && (self.blur_kernel < 3 || self.blur_kernel.is_multiple_of(2)) {
            return Err(Error::Config(format!("blur kernel {} must be odd and >= 3", self.blur_kernel)));
        }
        Ok(())
    }
}

/// Sensor presets: native angular resolution and a binarization threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LidarPreset {
    LivoxMid40,
    Vlp16,
    UltraPuck,
    Custom,
}

impl LidarPreset {
    pub fn parse(name: &str) -> Option<Self> {
        let key: String =
            name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Some(match key.as_str() {
            "livoxmid40" => LidarPreset::LivoxMid40,
            "vlp16" => LidarPreset::Vlp16,
            "ultrapuck" => LidarPreset::UltraPuck,
            "custom" => LidarPreset::Custom,
            _ => return None,
        })
    }

    /// Binarization threshold for the preset.
    ///
    /// The sensor values are tuned constants, not vendor figures: they sit
    /// halfway between the synthetic black (0.05) and wall (0.4) reflectances
    /// so the outer marker border separates from its background. All three
    /// sensors share that palette in the synthetic suite, hence one value.
    pub fn default_threshold(self) -> f64 {
        match self {
            LidarPreset::LivoxMid40 => 0.225,
            LidarPreset::Vlp16 => 0.225,
            LidarPreset::UltraPuck => 0.225,
            LidarPreset::Custom => 0.5,
        }
    }

    /// Native (horizontal, vertical) angular resolution in degrees, used as
    /// the image resolution. `None` for [`LidarPreset::Custom`].
    pub fn resolution_deg(self) -> Option<(f64, f64)> {
        match self {
            LidarPreset::LivoxMid40 => Some((0.05, 0.05)),
            LidarPreset::Vlp16 => Some((0.3, 1.33)),
            LidarPreset::UltraPuck => Some((0.4, 0.33)),
            LidarPreset::Custom => None,
        }
    }
}

pub fn default_threshold(preset: LidarPreset) -> f64 {
    preset.default_threshold()
}

/// A {0, 1} image, optionally tied to the intensity image it came from.
#[derive(Debug, Clone)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<u8>,
    provenance: Option<Arc<IntensityImage>>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![0; width * height], provenance: None }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                bits.push(f(u, v) as u8);
            }
        }
        Self { width, height, bits, provenance: None }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u] != 0
    }

    pub fn set(&mut self, u: usize, v: usize, bit: bool) {
        self.bits[v * self.width + u] = bit as u8;
    }

    /// Row-major bits, one byte (0 or 1) per pixel.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn provenance(&self) -> Option<&Arc<IntensityImage>> {
        self.provenance.as_ref()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Left-right mirror; provenance is dropped.
    pub fn flipped_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |u, v| self.get(self.width - 1 - u, v))
    }
}

impl PartialEq for BinaryImage {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.bits == other.bits
    }
}

pub fn preprocess(img: &Arc<IntensityImage>, params: &PreprocessParams) -> Result<BinaryImage> {
    let gray: Vec<f64> =
        img.cells().iter().map(|c| if c.observed { c.intensity } else { 0.0 }).collect();
    let mut out = threshold_values(&gray, img.width(), img.height(), params)?;
    out.provenance = Some(Arc::clone(img));
    Ok(out)
}

/// Blur and threshold a raw row-major grayscale buffer.
pub fn threshold_values(
    gray: &[f64],
    width: usize,
    height: usize,
    params: &PreprocessParams,
) -> Result<BinaryImage> {
    params.validate()?;
    if width == 0 || height == 0 || gray.len() != width * height {
        return Err(Error::Config("grayscale buffer does not match its dimensions".into()));
    }
    let values = if params.blur_enabled() {
        let kernel = gaussian_kernel(params.blur_sigma, params.blur_kernel);
        gaussian_blur(gray, width, height, &kernel)
    } else {
        gray.to_vec()
    };
    let bits = values.iter().map(|&g| (g >= params.threshold) as u8).collect();
    Ok(BinaryImage { width, height, bits, provenance: None })
}

/// 1D sampled Gaussian normalized to sum 1.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Vec<f64> {
    let half = (size / 2) as i64;
    let raw: Vec<f64> = (-half..=half)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`.
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m >= n as i64 { period - m } else { m }) as usize
}

/// Separable convolution with a symmetric kernel.
pub fn gaussian_blur(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; values.len()];
    for v in 0..height {
        let row = &values[v * width..(v + 1) * width];
        for u in 0..width {
            tmp[v * width + u] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(u as i64 + k as i64 - half, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for v in 0..height {
        for u in 0..width {
            out[v * width + u] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(v as i64 + k as i64 - half, height) * width + u])
                .sum();
        }
    }
    out
}
