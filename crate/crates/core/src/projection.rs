//! Spherical projection of a point cloud onto an intensity image.
//!
//! Column `u` follows azimuth, row `v` follows inclination with rows growing
//! downward (higher inclination is higher in the image). Because azimuth is
//! measured counter-clockwise from the sensor's forward axis, the image is a
//! left-right mirror of what a camera at the sensor origin would see.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{PointCloud, PointL};

pub const DEFAULT_DIMENSION_CAP: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    /// Radians in `(-pi, pi]`.
    pub azimuth: f64,
    /// Radians in `[-pi/2, pi/2]`.
    pub inclination: f64,
    pub range: f64,
}

pub fn spherical_from_cartesian(p: &PointL) -> Result<SphericalCoord> {
    let planar = p.x.hypot(p.y);
    let range = p.range();
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "point ({}, {}, {}) has no direction",
            p.x, p.y, p.z
        )));
    }
    let mut azimuth = p.y.atan2(p.x);
    if azimuth == -std::f64::consts::PI {
        azimuth = std::f64::consts::PI;
    }
    Ok(SphericalCoord { azimuth, inclination: p.z.atan2(planar), range })
}

/// Integer rounding with ties away from zero.
fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

/// Image geometry: angular resolution per pixel, pixel offsets of the zero
/// direction, and image size.
///
/// Offsets may be negative or exceed the image when the cloud does not
/// straddle the zero direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Azimuth radians per pixel column.
    pub azimuth_res: f64,
    /// Inclination radians per pixel row.
    pub inclination_res: f64,
    pub u_offset: i64,
    pub v_offset: i64,
    pub width: usize,
    pub height: usize,
}

impl ProjectionConfig {
    pub fn new(
        azimuth_res: f64,
        inclination_res: f64,
        u_offset: i64,
        v_offset: i64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cfg = Self { azimuth_res, inclination_res, u_offset, v_offset, width, height };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_resolution(self.azimuth_res, self.inclination_res)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image dimensions must be at least 1".into()));
        }
        Ok(())
    }

    /// Pixel for a direction without bounds checking.
    pub fn pixel_unchecked(&self, s: &SphericalCoord) -> (i64, i64) {
        (
            round_half_away(s.azimuth / self.azimuth_res) + self.u_offset,
            round_half_away(-s.inclination / self.inclination_res) + self.v_offset,
        )
    }

    pub fn pixel_from_spherical(&self, s: &SphericalCoord) -> Result<(usize, usize)> {
        let (u, v) = self.pixel_unchecked(s);
        self.checked(u, v)
    }

    pub fn checked(&self, u: i64, v: i64) -> Result<(usize, usize)> {
        if u < 0 || v < 0 || u as u64 >= self.width as u64 || v as u64 >= self.height as u64 {
            return Err(Error::OutOfBounds { u, v, width: self.width, height: self.height });
        }
        Ok((u as usize, v as usize))
    }

    /// Azimuth and inclination at the center of pixel `(u, v)`.
    pub fn angles_at(&self, u: f64, v: f64) -> (f64, f64) {
        (
            (u - self.u_offset as f64) * self.azimuth_res,
            -(v - self.v_offset as f64) * self.inclination_res,
        )
    }
}

fn check_resolution(azimuth_res: f64, inclination_res: f64) -> Result<()> {
    let ok = |r: f64| r.is_finite() && r > 0.0;
    if !ok(azimuth_res) || !ok(inclination_res) {
        return Err(Error::Config(format!(
            "angular resolutions must be positive, got {azimuth_res} and {inclination_res}"
        )));
    }
    Ok(())
}

/// Size the image to the angular extent of `cloud`.
pub fn make_config(cloud: &PointCloud, azimuth_res: f64, inclination_res: f64) -> Result<ProjectionConfig> {
    make_config_with_cap(cloud, azimuth_res, inclination_res, DEFAULT_DIMENSION_CAP)
}

/// Like [`make_config`] with an explicit cap on either image dimension.
///
/// The image spans the rounded extreme columns and rows, so its size is
/// `round(P / res) + 1` whenever the extremes sit on the pixel grid and
/// never clips a point otherwise.
pub fn make_config_with_cap(
    cloud: &PointCloud,
    azimuth_res: f64,
    inclination_res: f64,
    cap: usize,
) -> Result<ProjectionConfig> {
    check_resolution(azimuth_res, inclination_res)?;
    cloud.ensure_non_empty()?;
    let mut az = (f64::INFINITY, f64::NEG_INFINITY);
    let mut inc = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &cloud.points {
        let s = spherical_from_cartesian(p)?;
        az = (az.0.min(s.azimuth), az.1.max(s.azimuth));
        inc = (inc.0.min(s.inclination), inc.1.max(s.inclination));
    }
    let u_min = round_half_away(az.0 / azimuth_res);
    let u_max = round_half_away(az.1 / azimuth_res);
    let v_min = round_half_away(-inc.1 / inclination_res);
    let v_max = round_half_away(-inc.0 / inclination_res);
    let width = (u_max - u_min) as u64 + 1;
    let height = (v_max - v_min) as u64 + 1;
    if width > cap as u64 || height > cap as u64 {
        return Err(Error::Resolution { width, height, cap });
    }
    ProjectionConfig::new(azimuth_res, inclination_res, -u_min, -v_min, width as usize, height as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub intensity: f64,
    pub range: f64,
    pub observed: bool,
}

impl Cell {
    pub const UNOBSERVED: Cell = Cell { intensity: 0.0, range: f64::NAN, observed: false };
}

/// Per-pixel intensity and range with an observed flag.
#[derive(Debug, Clone)]
pub struct IntensityImage {
    config: ProjectionConfig,
    cells: Vec<Cell>,
    observed: usize,
    out_of_bounds: usize,
}

impl IntensityImage {
    /// Build directly from cells (row-major). Used for synthetic fixtures.
    pub fn from_cells(config: ProjectionConfig, cells: Vec<Cell>) -> Result<Self> {
        config.validate()?;
        if cells.len() != config.width * config.height {
            return Err(Error::Config("cell count does not match image size".into()));
        }
        let mut observed = 0;
        for c in &cells {
            if c.observed {
                if !(c.range > 0.0 && c.range.is_finite()) {
                    return Err(Error::Config("observed cell without positive range".into()));
                }
                observed += 1;
            }
        }
        Ok(Self { config, cells, observed, out_of_bounds: 0 })
    }

    pub fn config(&self) -> &ProjectionConfig {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn cell(&self, u: usize, v: usize) -> &Cell {
        &self.cells[v * self.config.width + u]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Intensity of an observed cell.
    pub fn intensity(&self, u: usize, v: usize) -> Option<f64> {
        let c = self.cell(u, v);
        c.observed.then_some(c.intensity)
    }

    pub fn is_observed(&self, u: usize, v: usize) -> bool {
        self.cell(u, v).observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed
    }

    /// Points that fell outside the configured image.
    pub fn out_of_bounds_count(&self) -> usize {
        self.out_of_bounds
    }

    pub fn occupancy_ratio(&self) -> f64 {
        self.observed as f64 / self.cells.len() as f64
    }
}

/// Project every point; where several points share a cell the nearest one
/// is kept (earliest in cloud order on exact range ties).
pub fn build_intensity_image(cloud: &PointCloud, cfg: &ProjectionConfig) -> Result<IntensityImage> {
    cfg.validate()?;
    cloud.ensure_non_empty()?;
    let targets: Vec<Option<(usize, f64, f64)>> = cloud
        .points
        .par_iter()
        .map(|p| {
            let s = spherical_from_cartesian(p).ok()?;
            let (u, v) = cfg.pixel_from_spherical(&s).ok()?;
            Some((v * cfg.width + u, s.range, p.intensity))
        })
        .collect();

    let mut cells = vec![Cell::UNOBSERVED; cfg.width * cfg.height];
    let mut observed = 0;
    let mut out_of_bounds = 0;
    for target in targets {
        let Some((idx, range, intensity)) = target else {
            out_of_bounds += 1;
            continue;
        };
        let cell = &mut cells[idx];
        if !cell.observed {
            observed += 1;
            *cell = Cell { intensity, range, observed: true };
        } else if range < cell.range {
            *cell = Cell { intensity, range, observed: true };
        }
    }
    if observed == 0 {
        return Err(Error::EmptyImage);
    }
    Ok(IntensityImage { config: *cfg, cells, observed, out_of_bounds })
}

/// Inverse projection using the stored range. `Ok(None)` for unobserved cells.
pub fn backproject_pixel(img: &IntensityImage, u: i64, v: i64) -> Result<Option<PointL>> {
    let (u, v) = img.config.checked(u, v)?;
    let cell = img.cell(u, v);
    if !cell.observed {
        return Ok(None);
    }
    let (theta, phi) = img.config.angles_at(u as f64, v as f64);
    let r = cell.range;
    Ok(Some(PointL::new(
        r * phi.cos() * theta.cos(),
        r * phi.cos() * theta.sin(),
        r * phi.sin(),
        cell.intensity,
    )))
}

/// A real-valued image position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel2D {
    pub u: f64,
    pub v: f64,
}

impl Pixel2D {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Nearest integer cell, ties away from zero.
    pub fn nearest_cell(&self) -> (i64, i64) {
        (round_half_away(self.u), round_half_away(self.v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    const DEG: f64 = PI / 180.0;

    #[test]
    fn spherical_axis_and_diagonal_cases() {
        let s = spherical_from_cartesian(&PointL::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!((s.azimuth, s.inclination, s.range), (0.0, 0.0, 1.0));

        let s = spherical_from_cartesian(&PointL::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((s.azimuth - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(s.inclination, 0.0);
        assert!((s.range - 2f64.sqrt()).abs() < 1e-15);

        let s = spherical_from_cartesian(&PointL::new(1.0, 1.0, 2f64.sqrt(), 0.0)).unwrap();
        assert!((s.azimuth - FRAC_PI_4).abs() < 1e-15);
        assert!((s.inclination - FRAC_PI_4).abs() < 1e-15);
        assert!((s.range - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spherical_zero_range_is_degenerate() {
        let err = spherical_from_cartesian(&PointL::new(0.0, 0.0, 0.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn azimuth_stays_in_half_open_interval() {
        let s = spherical_from_cartesian(&PointL::new(-1.0, -0.0, 0.0, 0.0)).unwrap();
        assert_eq!(s.azimuth, PI);
    }

    #[test]
    fn pixel_center_unit_step_and_rounding() {
        let res = 0.05 * DEG;
        let cfg = ProjectionConfig::new(res, res, 10, 20, 40, 40).unwrap();
        let at = |az: f64, inc: f64| {
            cfg.pixel_from_spherical(&SphericalCoord { azimuth: az, inclination: inc, range: 1.0 })
                .unwrap()
        };
        assert_eq!(at(0.0, 0.0), (10, 20));
        assert_eq!(at(res, 0.0), (11, 20));
        assert_eq!(at(0.024 * DEG, 0.0), (10, 20));
        // Higher inclination is a smaller row index.
        assert_eq!(at(0.0, res), (10, 19));
    }

    #[test]
    fn pixel_outside_image_is_error() {
        let cfg = ProjectionConfig::new(0.01, 0.01, 0, 0, 5, 5).unwrap();
        let s = SphericalCoord { azimuth: 1.0, inclination: 0.0, range: 1.0 };
        assert!(matches!(cfg.pixel_from_spherical(&s), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1);
        assert_eq!(round_half_away(-0.5), -1);
        assert_eq!(round_half_away(2.5), 3);
    }

    fn point_at(az: f64, inc: f64, r: f64, i: f64) -> PointL {
        PointL::new(r * inc.cos() * az.cos(), r * inc.cos() * az.sin(), r * inc.sin(), i)
    }

    #[test]
    fn make_config_two_points() {
        let res = 0.1 * DEG;
        let cloud = PointCloud::new(vec![point_at(0.0, 0.0, 1.0, 0.1), point_at(res, 0.0, 1.0, 0.1)]);
        let cfg = make_config(&cloud, res, res).unwrap();
        assert_eq!((cfg.width, cfg.height), (2, 1));
    }

    #[test]
    fn make_config_extent_arithmetic() {
        // 81.7 x 25.1 degrees, symmetric about the forward axis.
        let res = 0.05 * DEG;
        let (hw, hh) = (81.7 / 2.0 * DEG, 25.1 / 2.0 * DEG);
        let cloud = PointCloud::new(vec![
            point_at(-hw, -hh, 3.0, 0.5),
            point_at(hw, hh, 3.0, 0.5),
            point_at(0.0, 0.0, 3.0, 0.5),
        ]);
        let cfg = make_config(&cloud, res, res).unwrap();
        assert_eq!((cfg.width, cfg.height), (1635, 503));
    }

    #[test]
    fn make_config_rejects_bad_inputs() {
        let cloud = PointCloud::new(vec![point_at(0.0, 0.0, 1.0, 0.1)]);
        assert!(matches!(make_config(&cloud, 0.0, 0.01), Err(Error::Config(_))));
        assert!(matches!(make_config(&PointCloud::default(), 0.01, 0.01), Err(Error::EmptyCloud)));
        let wide = PointCloud::new(vec![point_at(-1.0, 0.0, 1.0, 0.1), point_at(1.0, 0.0, 1.0, 0.1)]);
        assert!(matches!(
            make_config_with_cap(&wide, 1e-4, 1e-4, 1000),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn make_config_covers_one_sided_cloud() {
        let res = 0.01;
        let cloud = PointCloud::new(vec![
            point_at(0.304, 0.213, 2.0, 0.1),
            point_at(0.516, 0.401, 2.0, 0.1),
            point_at(0.41, 0.3, 2.0, 0.1),
        ]);
        let cfg = make_config(&cloud, res, res).unwrap();
        for p in &cloud.points {
            let s = spherical_from_cartesian(p).unwrap();
            cfg.pixel_from_spherical(&s).unwrap();
        }
    }

    #[test]
    fn single_point_image() {
        let cloud = PointCloud::new(vec![PointL::new(1.0, 0.0, 0.0, 0.8)]);
        let cfg = ProjectionConfig::new(0.01, 0.01, 0, 0, 1, 1).unwrap();
        let img = build_intensity_image(&cloud, &cfg).unwrap();
        assert_eq!(*img.cell(0, 0), Cell { intensity: 0.8, range: 1.0, observed: true });
        assert_eq!(img.occupancy_ratio(), 1.0);
    }

    #[test]
    fn nearest_point_wins_a_shared_cell() {
        let cloud = PointCloud::new(vec![
            PointL::new(2.0, 0.0, 0.0, 0.9),
            PointL::new(1.0, 0.0, 0.0, 0.2),
            PointL::new(3.0, 0.0, 0.0, 0.4),
        ]);
        let cfg = ProjectionConfig::new(0.01, 0.01, 0, 0, 1, 1).unwrap();
        let img = build_intensity_image(&cloud, &cfg).unwrap();
        assert_eq!(*img.cell(0, 0), Cell { intensity: 0.2, range: 1.0, observed: true });
    }

    #[test]
    fn all_points_out_of_bounds_is_empty_image() {
        let cloud = PointCloud::new(vec![PointL::new(0.0, 1.0, 0.0, 0.9)]);
        let cfg = ProjectionConfig::new(0.01, 0.01, 0, 0, 3, 3).unwrap();
        assert!(matches!(build_intensity_image(&cloud, &cfg), Err(Error::EmptyImage)));
    }

    #[test]
    fn backprojection_of_grid_point_and_unobserved() {
        let cloud = PointCloud::new(vec![PointL::new(1.0, 0.0, 0.0, 0.3)]);
        let cfg = ProjectionConfig::new(0.01, 0.01, 1, 1, 3, 3).unwrap();
        let img = build_intensity_image(&cloud, &cfg).unwrap();
        let p = backproject_pixel(&img, 1, 1).unwrap().unwrap();
        assert!((p.xyz() - nalgebra::Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(p.intensity, 0.3);
        assert_eq!(backproject_pixel(&img, 0, 0).unwrap(), None);
        assert!(matches!(backproject_pixel(&img, 3, 0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(backproject_pixel(&img, -1, 0), Err(Error::OutOfBounds { .. })));
    }
}
