#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::pointcloud::{parse_cloud, CloudFormat};

fuzz_target!(|data: &[u8]| {
    if let Ok((cloud, _)) = parse_cloud(data, CloudFormat::PlyAscii) {
        assert!(!cloud.is_empty());
    }
});
