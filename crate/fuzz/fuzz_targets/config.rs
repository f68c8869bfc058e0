#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::pipeline::{PipelineConfig, Settings};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(cfg) = PipelineConfig::from_json(&text) {
        let _ = Settings::from_config(&cfg);
    }
});
