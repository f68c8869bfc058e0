//! Regenerates the shipped marker families.
//!
//! For each family the search starts at a high minimum distance and lowers it
//! until the greedy pass finds enough codes.
//!
//!     cargo run --release -p lidar-fiducial --example gen_codebooks -- crates/core/data

use lidar_fiducial::detector::codebook::{greedy_search, Codebook};

struct Family {
    name: &'static str,
    grid: usize,
    count: usize,
    seed: u64,
    budget: usize,
    max_hamming_cap: u32,
}

const FAMILIES: [Family; 2] = [
    Family { name: "lfm4x4_16", grid: 4, count: 16, seed: 4, budget: 1 << 16, max_hamming_cap: 2 },
    Family { name: "lfm6x6_64", grid: 6, count: 64, seed: 6, budget: 400_000, max_hamming_cap: 3 },
];

fn main() {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".into());
    for f in &FAMILIES {
        let (distance, codes) = (1..=(f.grid * f.grid) as u32)
            .rev()
            .find_map(|d| greedy_search(f.grid, f.count, d, f.seed, f.budget).map(|c| (d, c)))
            .expect("distance 1 always succeeds");
        let max_hamming = ((distance - 1) / 2).min(f.max_hamming_cap);
        let book = Codebook::new(
            f.name,
            f.grid,
            1,
            max_hamming,
            codes.into_iter().enumerate().map(|(i, c)| (i as u32, c)).collect(),
        )
        .expect("search output is a valid codebook");
        let text = format!(
            "# greedy_search(grid={}, count={}, min_distance={distance}, seed={}, budget={})\n{}",
            f.grid,
            f.count,
            f.seed,
            f.budget,
            book.to_text()
        );
        let path = std::path::Path::new(&out_dir).join(format!("{}.txt", f.name));
        std::fs::write(&path, text).expect("write codebook");
        println!("{}: min distance {distance}, max_hamming {max_hamming}", path.display());
    }
}
