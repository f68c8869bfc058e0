#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::synth::Scene;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(scene) = Scene::from_json(&text) {
        let _ = scene.marker_map();
    }
});
