//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by a path of integers below the
//! master seed, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `stream` into `base`, yielding an independent child seed.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn derive_path(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(base, |acc, &s| derive(acc, s))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream identifiers used within one Monte-Carlo drop.
pub mod stream {
    pub const LAYOUT: u64 = 1;
    pub const SHADOWING: u64 = 2;
    pub const CHANNELS: u64 = 3;
    pub const PILOTS: u64 = 4;
    pub const CLI_PILOT_NOISE: u64 = 5;
    pub const FORWARDING: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
    pub const DATA: u64 = 8;
    pub const SLOT_NOISE: u64 = 9;
    pub const UL_PILOTS: u64 = 10;
    pub const REDRAW: u64 = 11;
}
