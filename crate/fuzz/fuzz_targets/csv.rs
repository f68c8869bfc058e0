#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::pointcloud::{parse_cloud, CloudFormat};

fuzz_target!(|data: &[u8]| {
    if let Ok((cloud, _)) = parse_cloud(data, CloudFormat::Csv) {
        assert!(cloud.points.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite()));
    }
});
