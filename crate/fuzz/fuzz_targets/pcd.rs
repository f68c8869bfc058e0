#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::pointcloud::{encode_cloud, parse_cloud, CloudFormat};

fuzz_target!(|data: &[u8]| {
    // Either encoding is accepted regardless of the requested variant.
    if let Ok((cloud, report)) = parse_cloud(data, CloudFormat::PcdBinary) {
        assert_eq!(report.records, cloud.len() + report.dropped_zero_range + report.dropped_non_finite);
        assert!(cloud.points.iter().all(|p| (0.0..=1.0).contains(&p.intensity) && p.range() > 0.0));
        // Narrowing to f32 may overflow or flush points to the origin, never add any.
        let bytes = encode_cloud(&cloud, CloudFormat::PcdBinary).expect("non-empty cloud encodes");
        if let Ok((again, _)) = parse_cloud(&bytes, CloudFormat::PcdBinary) {
            assert!(again.len() <= cloud.len());
        }
    }
});
