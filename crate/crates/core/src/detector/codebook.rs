//! Marker families.
//!
//! File format, one record per line, `#` starts a comment:
//!
//! ```text
//! family, grid, border, max_hamming
//! id:hexbits
//! ```
//!
//! `hexbits` holds the `grid * grid` payload bits row-major, top row first,
//! most significant bit first, as seen facing the marker. A set bit is a
//! white cell.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const FAMILY_4X4: &str = include_str!("../../data/lfm4x4_16.txt");
pub const FAMILY_6X6: &str = include_str!("../../data/lfm6x6_64.txt");
/// Widest accepted black border, in cells.
pub const MAX_BORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    family: String,
    grid: usize,
    border: usize,
    max_hamming: u32,
    codes: Vec<(u32, u64)>,
}

/// Rotate a `grid x grid` payload a quarter turn counter-clockwise.
pub fn rotate_ccw(code: u64, grid: usize) -> u64 {
    let mut out = 0u64;
    for r in 0..grid {
        for c in 0..grid {
            // new[r][c] = old[c][grid - 1 - r]
            if get_bit(code, grid, c, grid - 1 - r) {
                out |= bit_mask(grid, r, c);
            }
        }
    }
    out
}

fn bit_mask(grid: usize, r: usize, c: usize) -> u64 {
    1u64 << (grid * grid - 1 - (r * grid + c))
}

pub fn get_bit(code: u64, grid: usize, r: usize, c: usize) -> bool {
    code & bit_mask(grid, r, c) != 0
}

/// The four orientations, `[code, ccw, ccw^2, ccw^3]`.
pub fn rotations(code: u64, grid: usize) -> [u64; 4] {
    let r1 = rotate_ccw(code, grid);
    let r2 = rotate_ccw(r1, grid);
    [code, r1, r2, rotate_ccw(r2, grid)]
}

fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// Smallest Hamming distance between `code` and its own non-trivial rotations.
fn self_distance(code: u64, grid: usize) -> u32 {
    rotations(code, grid)[1..].iter().map(|&r| hamming(code, r)).min().unwrap_or(u32::MAX)
}

fn cross_distance(a: u64, b: u64, grid: usize) -> u32 {
    rotations(b, grid).iter().map(|&r| hamming(a, r)).min().unwrap_or(u32::MAX)
}

impl Codebook {
    pub fn new(
        family: impl Into<String>,
        grid: usize,
        border: usize,
        max_hamming: u32,
        codes: Vec<(u32, u64)>,
    ) -> Result<Self> {
        let book = Self { family: family.into(), grid, border, max_hamming, codes };
        book.validate()?;
        Ok(book)
    }

    pub fn builtin(family: &str) -> Option<Self> {
        [FAMILY_4X4, FAMILY_6X6]
            .into_iter()
            .map(|text| Self::parse(text).expect("shipped codebook is valid"))
            .find(|b| b.family == family)
    }

    pub fn builtin_4x4() -> Self {
        Self::parse(FAMILY_4X4).expect("shipped codebook is valid")
    }

    pub fn builtin_6x6() -> Self {
        Self::parse(FAMILY_6X6).expect("shipped codebook is valid")
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn border(&self) -> usize {
        self.border
    }

    /// Cells per marker side, border included.
    pub fn cells_per_side(&self) -> usize {
        self.grid + 2 * self.border
    }

    pub fn max_hamming(&self) -> u32 {
        self.max_hamming
    }

    pub fn codes(&self) -> &[(u32, u64)] {
        &self.codes
    }

    pub fn code(&self, id: u32) -> Option<u64> {
        self.codes.iter().find(|(i, _)| *i == id).map(|&(_, c)| c)
    }

    /// Smallest distance between any two codes under rotation, or between a
    /// code and its own rotations.
    pub fn min_distance(&self) -> u32 {
        let mut best = u32::MAX;
        for (k, &(_, a)) in self.codes.iter().enumerate() {
            best = best.min(self_distance(a, self.grid));
            for &(_, b) in &self.codes[k + 1..] {
                best = best.min(cross_distance(a, b, self.grid));
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.grid) {
            return Err(Error::Codebook(format!("grid {} outside 1..=8", self.grid)));
        }
        if !(1..=MAX_BORDER).contains(&self.border) {
            return Err(Error::Codebook(format!("border {} outside 1..={MAX_BORDER}", self.border)));
        }
        if self.codes.is_empty() {
            return Err(Error::Codebook("no codes".into()));
        }
        let bits = self.grid * self.grid;
        if self.max_hamming as usize > bits {
            return Err(Error::Codebook(format!("max_hamming {} exceeds {bits} payload bits", self.max_hamming)));
        }
        let limit = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let mut ids: Vec<u32> = self.codes.iter().map(|c| c.0).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Codebook("duplicate id".into()));
        }
        if let Some((id, _)) = self.codes.iter().find(|(_, c)| *c > limit) {
            return Err(Error::Codebook(format!("code {id} has more than {bits} bits")));
        }
        let d = self.min_distance();
        if d <= 2 * self.max_hamming {
            return Err(Error::Codebook(format!(
                "minimum rotational distance {d} does not exceed 2 * max_hamming = {}",
                2 * self.max_hamming
            )));
        }
        Ok(())
    }

    /// Parse the text form: a `family, grid, border, max_hamming` header
    /// followed by `id: hexbits` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(String, usize, usize, u32)> = None;
        let mut codes = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Codebook(format!("line {}: {what}", k + 1));
            match &header {
                None => {
                    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
                    let [family, grid, border, max_h] = parts.as_slice() else {
                        return Err(bad("header must be 'family, grid, border, max_hamming'"));
                    };
                    if family.is_empty() {
                        return Err(bad("empty family name"));
                    }
                    let grid: usize = grid.parse().map_err(|_| bad("bad grid"))?;
                    if !(1..=8).contains(&grid) {
                        return Err(bad("grid outside 1..=8"));
                    }
                    let border = border.parse().map_err(|_| bad("bad border"))?;
                    let max_h = max_h.parse().map_err(|_| bad("bad max_hamming"))?;
                    header = Some((family.to_string(), grid, border, max_h));
                }
                Some((_, grid, _, _)) => {
                    let (id, hex) = line.split_once(':').ok_or_else(|| bad("expected id:hexbits"))?;
                    let id: u32 = id.trim().parse().map_err(|_| bad("bad id"))?;
                    let hex = hex.trim();
                    if hex.is_empty() || hex.len() != (grid * grid).div_ceil(4) {
                        return Err(bad("hex payload has the wrong length"));
                    }
                    let code = u64::from_str_radix(hex, 16).map_err(|_| bad("bad hex payload"))?;
                    codes.push((id, code));
                }
            }
        }
        let (family, grid, border, max_h) =
            header.ok_or_else(|| Error::Codebook("missing header".into()))?;
        Self::new(family, grid, border, max_h, codes)
    }

    pub fn to_text(&self) -> String {
        let digits = (self.grid * self.grid).div_ceil(4);
        let mut out = format!("{}, {}, {}, {}\n", self.family, self.grid, self.border, self.max_hamming);
        for (id, code) in &self.codes {
            out.push_str(&format!("{id}:{code:0digits$x}\n"));
        }
        out
    }
}

/// Greedy max-distance code search.
///
/// Candidates are visited in a seeded random order and accepted when their
/// rotational distance to every accepted code, and to their own rotations,
/// is at least `min_distance`. Payloads with fewer than a quarter (or more
/// than three quarters) of the bits set are skipped. Returns `None` if fewer
/// than `count` codes are found within `budget` candidates.
pub fn greedy_search(
    grid: usize,
    count: usize,
    min_distance: u32,
    seed: u64,
    budget: usize,
) -> Option<Vec<u64>> {
    let bits = (grid * grid) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Box<dyn Iterator<Item = u64>> = if bits <= 20 {
        let mut all: Vec<u64> = (0..1u64 << bits).collect();
        all.shuffle(&mut rng);
        Box::new(all.into_iter().take(budget))
    } else {
        let mask = (1u64 << bits) - 1;
        Box::new((0..budget).map(move |_| rng.random::<u64>() & mask))
    };
    let (lo, hi) = (bits / 4, 3 * bits / 4);
    let mut accepted: Vec<u64> = Vec::with_capacity(count);
    for cand in candidates {
        let ones = cand.count_ones();
        if ones < lo || ones > hi || self_distance(cand, grid) < min_distance {
            continue;
        }
        if accepted.iter().all(|&a| cross_distance(cand, a, grid) >= min_distance) {
            accepted.push(cand);
            if accepted.len() == count {
                return Some(accepted);
            }
        }
    }
    None
}
