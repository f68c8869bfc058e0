#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::detector::{detect_markers, Codebook, DetectorParams};
use lidar_fiducial::preprocess::BinaryImage;

// Two header bytes give the image size; the rest are packed pixels.
fuzz_target!(|data: &[u8]| {
    let [w, h, bits @ ..] = data else { return };
    let (w, h) = (*w as usize + 1, *h as usize + 1);
    let img = BinaryImage::from_fn(w, h, |u, v| {
        let k = v * w + u;
        bits.get(k / 8).is_some_and(|b| b & (0x80 >> (k % 8)) != 0)
    });
    for book in [Codebook::builtin_4x4(), Codebook::builtin_6x6()] {
        for d in detect_markers(&img, &book, &DetectorParams::lidar()) {
            assert!(book.code(d.id).is_some());
            assert!(d.hamming <= book.max_hamming());
        }
    }
});
