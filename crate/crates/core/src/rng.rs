//! Keyed random streams.
//!
//! Every stochastic draw is taken from a ChaCha8 stream whose seed is a hash
//! of `(run seed, cell index, year, phase)`. A cell's draws therefore do not
//! depend on which worker processes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stochastic phase of the yearly procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Phase {
    Init = 0,
    FireGen = 1,
    Fire = 2,
    NaturalDeath = 3,
    Germination = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub cell: u64,
    pub year: u64,
}

impl StreamKey {
    pub fn new(seed: u64, cell: usize, year: u32) -> Self {
        StreamKey {
            seed,
            cell: cell as u64,
            year: u64::from(year),
        }
    }

    pub fn stream(&self, phase: Phase) -> Stream {
        stream(self.seed, self.cell, self.year, phase)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the key components one at a time so that no two keys share a seed
/// by simple arithmetic coincidence (e.g. `cell + year`).
pub fn stream_seed(seed: u64, cell: u64, year: u64, phase: Phase) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ cell);
    h = splitmix64(h ^ year);
    splitmix64(h ^ phase as u64)
}

pub fn stream(seed: u64, cell: u64, year: u64, phase: Phase) -> Stream {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, cell, year, phase))
}
