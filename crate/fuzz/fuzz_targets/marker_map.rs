#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::pose::MarkerMap;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(map) = MarkerMap::from_json(&text) {
        let again = MarkerMap::from_json(&map.to_json_value().to_string()).expect("own output parses");
        assert_eq!(again.len(), map.len());
    }
});
