#![no_main]

use libfuzzer_sys::fuzz_target;
use lidar_fiducial::detector::Codebook;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(book) = Codebook::parse(text) {
        assert_eq!(Codebook::parse(&book.to_text()).expect("own output parses"), book);
    }
});
