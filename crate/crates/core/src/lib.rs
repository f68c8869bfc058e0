//! Fiducial markers for LiDAR through intensity images.
//!
//! An intensity point cloud is projected onto a spherical image, binarized,
//! and searched for square fiducial markers with an ordinary image-space
//! detector. The detected corners are lifted back to 3D using the range
//! stored per pixel (or interpolated along the image column when the corner
//! pixel was never scanned), and the LiDAR pose follows from a closed-form
//! rigid alignment against the known marker layout.
//!
//! Stages:
//!
//! 1. [`pointcloud`] – point model and PCD / PLY / CSV ingestion.
//! 2. [`projection`] – spherical projection into an [`IntensityImage`].
//! 3. [`preprocess`] – optional Gaussian blur and fixed-threshold binarization.
//! 4. [`detector`] – quad extraction, homography sampling, codebook decoding.
//! 5. [`features3d`] – back-projection of corners, unobserved-corner interpolation.
//! 6. [`pose`] – SVD alignment of world and LiDAR vertex sets.
//!
//! [`synth`] generates scans with exact ground truth and [`pipeline`] wires
//! the stages together.

pub mod detector;
pub mod error;
pub mod export;
pub mod features3d;
pub mod json;
pub mod pipeline;
pub mod pointcloud;
pub mod pose;
pub mod preprocess;
pub mod projection;
pub mod synth;

pub use detector::{Codebook, Detection2D, DetectorParams};
pub use error::{Error, Result};
pub use features3d::{Feature3D, FeatureSet, Provenance};
pub use pointcloud::{CloudFormat, LoadReport, PointCloud, PointL};
pub use pose::{MarkerMap, Pose, PoseReport};
pub use preprocess::{BinaryImage, LidarPreset, PreprocessParams};
pub use projection::{IntensityImage, Pixel2D, ProjectionConfig, SphericalCoord};
