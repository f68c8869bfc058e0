//! End-to-end orchestration with per-stage wall-clock timings.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detector::{detect_markers, Codebook, Detection2D, DetectorParams};
use crate::error::{Error, Result};
use crate::features3d::{assemble_feature_set, lift_detection, AssemblyReport, FeatureSet, DEFAULT_SEARCH_LIMIT};
use crate::pointcloud::PointCloud;
use crate::pose::{match_correspondences, solve_pose, Correspondences, MarkerMap, Pose};
use crate::preprocess::{preprocess, BinaryImage, LidarPreset, PreprocessParams};
use crate::projection::{build_intensity_image, make_config, IntensityImage};

pub const DEFAULT_FAMILY: &str = "lfm4x4_16";

/// Every field is optional so a config file and command-line flags can be
/// layered with [`PipelineConfig::overlay`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub lidar_model: Option<String>,
    pub theta_a_deg: Option<f64>,
    pub theta_i_deg: Option<f64>,
    pub threshold: Option<f64>,
    pub blur_sigma: Option<f64>,
    pub blur_kernel: Option<usize>,
    /// Built-in family name or codebook file path.
    pub codebook: Option<String>,
    pub marker_map: Option<PathBuf>,
    pub search_limit: Option<usize>,
    pub min_area: Option<f64>,
    pub max_cos: Option<f64>,
    pub max_border_errors: Option<usize>,
    /// Detect in the unmirrored image (only for clouds already mirrored).
    pub no_mirror: Option<bool>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub annotate: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: PipelineConfig) -> Self {
        overlay_fields!(self, top; lidar_model, theta_a_deg, theta_i_deg, threshold, blur_sigma,
            blur_kernel, codebook, marker_map, search_limit, min_area, max_cos, max_border_errors,
            no_mirror, seed, out_dir, annotate);
        self
    }

    pub fn preset(&self) -> Result<LidarPreset> {
        match &self.lidar_model {
            None => Ok(LidarPreset::Custom),
            Some(name) => {
                LidarPreset::parse(name).ok_or_else(|| Error::Config(format!("unknown lidar model {name:?}")))
            }
        }
    }

    /// Azimuth and inclination resolution in radians. Explicit angles win over the preset.
    pub fn resolution(&self) -> Result<(f64, f64)> {
        let preset = self.preset()?.resolution_deg();
        let a = self.theta_a_deg.or(preset.map(|p| p.0));
        let i = self.theta_i_deg.or(preset.map(|p| p.1));
        match (a, i) {
            (Some(a), Some(i)) => Ok((a.to_radians(), i.to_radians())),
            _ => Err(Error::Config("angular resolution needs --theta-a/--theta-i or a lidar model".into())),
        }
    }

    pub fn preprocess_params(&self) -> Result<PreprocessParams> {
        let mut p = PreprocessParams::with_threshold(self.threshold.unwrap_or(self.preset()?.default_threshold()));
        if let Some(s) = self.blur_sigma {
            p.blur_sigma = s;
        }
        if let Some(k) = self.blur_kernel {
            p.blur_kernel = k;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn detector_params(&self) -> Result<DetectorParams> {
        let mut d = DetectorParams::lidar();
        if let Some(a) = self.min_area {
            d.min_area = a;
        }
        if let Some(c) = self.max_cos {
            d.max_cos = c;
        }
        if let Some(b) = self.max_border_errors {
            d.max_border_errors = b;
        }
        if self.no_mirror == Some(true) {
            d.mirrored = false;
        }
        if !(d.min_area >= 0.0) || !(0.0..1.0).contains(&d.max_cos) {
            return Err(Error::Config("min_area must be >= 0 and max_cos in [0, 1)".into()));
        }
        Ok(d)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        let name = self.codebook.as_deref().unwrap_or(DEFAULT_FAMILY);
        if let Some(book) = Codebook::builtin(name) {
            return Ok(book);
        }
        let text = std::fs::read_to_string(name).map_err(|e| Error::io(name, e))?;
        Codebook::parse(&text)
    }

    pub fn marker_map(&self) -> Result<MarkerMap> {
        let path = self.marker_map.as_ref().ok_or_else(|| Error::Config("a marker map is required".into()))?;
        MarkerMap::load(path)
    }

    pub fn search_limit(&self) -> usize {
        self.search_limit.unwrap_or(DEFAULT_SEARCH_LIMIT)
    }
}

/// Resolved parameters for one pipeline run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub azimuth_res: f64,
    pub inclination_res: f64,
    pub preprocess: PreprocessParams,
    pub detector: DetectorParams,
    pub codebook: Codebook,
    pub search_limit: usize,
}

impl Settings {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let (azimuth_res, inclination_res) = cfg.resolution()?;
        Ok(Self {
            azimuth_res,
            inclination_res,
            preprocess: cfg.preprocess_params()?,
            detector: cfg.detector_params()?,
            codebook: cfg.codebook()?,
            search_limit: cfg.search_limit(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings(pub Vec<(&'static str, Duration)>);

impl Timings {
    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed()));
        out
    }

    pub fn get(&self, stage: &str) -> Option<Duration> {
        self.0.iter().find(|(s, _)| *s == stage).map(|(_, d)| *d)
    }

    pub fn total(&self) -> Duration {
        self.0.iter().map(|(_, d)| *d).sum()
    }

    /// One `timing stage=<name> ms=<value>` line per stage.
    pub fn lines(&self) -> Vec<String> {
        self.0.iter().map(|(s, d)| format!("timing stage={s} ms={:.3}", d.as_secs_f64() * 1e3)).collect()
    }
}

pub fn render(cloud: &PointCloud, settings: &Settings, timings: &mut Timings) -> Result<Arc<IntensityImage>> {
    let cfg = timings.time("configure", || make_config(cloud, settings.azimuth_res, settings.inclination_res))?;
    let img = timings.time("project", || build_intensity_image(cloud, &cfg))?;
    Ok(Arc::new(img))
}

#[derive(Debug, Clone)]
pub struct DetectOutput {
    pub binary: BinaryImage,
    pub detections: Vec<Detection2D>,
}

pub fn detect(img: &Arc<IntensityImage>, settings: &Settings, timings: &mut Timings) -> Result<DetectOutput> {
    let binary = timings.time("preprocess", || preprocess(img, &settings.preprocess))?;
    let detections = timings.time("detect", || detect_markers(&binary, &settings.codebook, &settings.detector));
    Ok(DetectOutput { binary, detections })
}

#[derive(Debug, Clone)]
pub struct PoseOutput {
    pub features: FeatureSet,
    pub assembly: AssemblyReport,
    pub correspondences: Correspondences,
    pub pose: Pose,
}

pub fn lift_features(
    img: &IntensityImage,
    detections: &[Detection2D],
    search_limit: usize,
) -> Result<(FeatureSet, AssemblyReport)> {
    assemble_feature_set(detections.iter().map(|d| lift_detection(img, d, search_limit)).collect())
}

pub fn estimate_pose(
    img: &IntensityImage,
    detections: &[Detection2D],
    map: &MarkerMap,
    search_limit: usize,
    timings: &mut Timings,
) -> Result<PoseOutput> {
    let (features, assembly) = timings.time("features3d", || lift_features(img, detections, search_limit))?;
    let (correspondences, pose) = timings.time("pose", || -> Result<_> {
        let corr = match_correspondences(map, &features)?;
        let pose = solve_pose(&corr.world, &corr.lidar)?;
        Ok((corr, pose))
    })?;
    Ok(PoseOutput { features, assembly, correspondences, pose })
}

/// Cloud to pose in one call.
pub fn run_pose(cloud: &PointCloud, settings: &Settings, map: &MarkerMap) -> Result<(DetectOutput, PoseOutput, Timings)> {
    let mut timings = Timings::default();
    let img = render(cloud, settings, &mut timings)?;
    let det = detect(&img, settings, &mut timings)?;
    let pose = estimate_pose(&img, &det.detections, map, settings.search_limit, &mut timings)?;
    Ok((det, pose, timings))
}
