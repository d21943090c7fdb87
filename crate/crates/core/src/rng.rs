//! Seeded randomness.
//!
//! Every random decision in the crate is drawn from [`Rng`], ChaCha8 keyed by a
//! 64-bit seed. ChaCha is counter-based, so streams for different seeds are
//! independent and a run is a pure function of its seed.
//!
//! Seeds for sub-experiments are derived with [`derive_seed`], a SplitMix64
//! chain over `(master, cell, trial)`:
//!
//! ```text
//! h0 = splitmix64(master)
//! h1 = splitmix64(h0 ^ cell)
//! seed = splitmix64(h1 ^ trial)
//! ```
//!
//! where `splitmix64(z)` adds `0x9E3779B97F4A7C15` and applies the standard
//! SplitMix64 finalizer (`xor-shift 30, * 0xBF58476D1CE4E5B9, xor-shift 27,
//! * 0x94D049BB133111EB, xor-shift 31`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Trial index reserved for the formula drawn for a cell.
pub const FORMULA_STREAM: u64 = u64::MAX;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, cell: u64, trial: u64) -> u64 {
    let h0 = splitmix64(master);
    let h1 = splitmix64(h0 ^ cell);
    splitmix64(h1 ^ trial)
}
