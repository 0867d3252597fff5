//! Pixel-level mapping tables.
//!
//! A mapping replaces every 8-bit sample by a real value looked up in a
//! 256-entry table. Both table families break the monotone ordering of
//! pixel levels, so neighbouring levels in a smooth region land far apart
//! and low-frequency content turns into high-frequency signal.
//!
//! - The fixed table is `v - round2(v / 256) * 256`, where `round2` rounds to
//!   two decimals with ties to even. One table is shared by all channels.
//! - Random tables are drawn per image and per channel, i.i.d. uniform on
//!   `[-1, 1)`.

use crate::image::{Image8, ImageF};
use crate::rng;
use crate::{Error, Result};

pub const LEVELS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct MappingTable {
    entries: [f64; LEVELS],
}

impl MappingTable {
    pub fn new(entries: [f64; LEVELS]) -> Result<Self> {
        if let Some(v) = entries.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument(format!("table entry {v} is not finite")));
        }
        Ok(Self { entries })
    }

    pub fn from_fn(f: impl Fn(u8) -> f64) -> Result<Self> {
        Self::new(std::array::from_fn(|v| f(v as u8)))
    }

    /// `T[v] = v`.
    pub fn identity() -> Self {
        Self {
            entries: std::array::from_fn(|v| v as f64),
        }
    }

    /// The usual `[-1, 1]` input normalization `T[v] = v / 127.5 - 1`.
    pub fn standard_normalization() -> Self {
        Self {
            entries: std::array::from_fn(|v| v as f64 / 127.5 - 1.0),
        }
    }

    pub fn entries(&self) -> &[f64; LEVELS] {
        &self.entries
    }

    #[inline]
    pub fn lookup(&self, v: u8) -> f64 {
        self.entries[v as usize]
    }
}

/// Fixed mapping or per-image random mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingMode {
    Fixed,
    Random { seed: u64 },
}

impl MappingMode {
    /// Tables to pass to [`apply_mapping`]: one shared table for fixed mode,
    /// three per-channel tables for random mode.
    pub fn tables(&self) -> Vec<MappingTable> {
        match *self {
            MappingMode::Fixed => vec![build_fixed_table()],
            MappingMode::Random { seed } => build_random_tables(seed).to_vec(),
        }
    }
}

/// `round(25 v / 64)` with ties to even. `25 v / 64` is exact in binary
/// floating point for every 8-bit `v`, so this is the exact two-decimal
/// rounding bucket of `v / 256`, scaled by 100.
#[inline]
fn hundredths_bucket(v: u8) -> i64 {
    (25.0 * f64::from(v) / 64.0).round_ties_even() as i64
}

pub fn build_fixed_table() -> MappingTable {
    MappingTable {
        entries: std::array::from_fn(|v| {
            let k = hundredths_bucket(v as u8);
            // Integer numerator, one correctly-rounded division.
            (100 * v as i64 - 256 * k) as f64 / 100.0
        }),
    }
}

/// Three independent tables, channel 0 first, each entry uniform on `[-1, 1)`.
pub fn build_random_tables(seed: u64) -> [MappingTable; 3] {
    let mut r = rng::seeded(seed);
    std::array::from_fn(|_| MappingTable {
        entries: std::array::from_fn(|_| rng::uniform(&mut r, -1.0, 1.0)),
    })
}

/// `out[y, x, c] = T_c[img[y, x, c]]`. A single table is broadcast to all
/// channels; otherwise exactly three tables are required.
pub fn apply_mapping(img: &Image8, tables: &[MappingTable]) -> Result<ImageF> {
    let per_channel: [&MappingTable; 3] = match tables {
        [t] => [t, t, t],
        [a, b, c] => [a, b, c],
        _ => return Err(Error::WrongTableCount(tables.len())),
    };
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| (0..3).map(move |c| per_channel[c].lookup(px[c])))
        .collect();
    ImageF::new(img.height(), img.width(), 3, data)
}

/// `|T[v + 1] - T[v]|` for `v` in `0..255`.
pub fn adjacent_gap_profile(table: &MappingTable) -> Vec<f64> {
    table.entries.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// 256 lines of `v,T_0[v][,T_1[v],T_2[v]]`, no header. Values use the
/// shortest round-trip decimal form.
pub fn tables_to_csv(tables: &[MappingTable]) -> String {
    let mut out = String::with_capacity(LEVELS * 16 * tables.len().max(1));
    for v in 0..LEVELS {
        out.push_str(&v.to_string());
        for t in tables {
            out.push(',');
            out.push_str(&t.entries[v].to_string());
        }
        out.push('\n');
    }
    out
}
