//! Seeded randomness shared by every component.
//!
//! All random decisions (clause choice, corpus shuffling, weight init) draw
//! from xorshift128 ([`rand_xorshift::XorShiftRng`]) seeded through
//! `SeedableRng::seed_from_u64`, so a given seed always reproduces the same
//! artifacts. Per-sentence streams mix the run seed with a 64-bit FNV-1a hash
//! of the sentence id.

use rand::SeedableRng;
use rand_xorshift::XorShiftRng;

pub type Rng = XorShiftRng;

pub fn seeded(seed: u64) -> Rng {
    XorShiftRng::seed_from_u64(seed)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn sentence_seed(seed: u64, sentence_id: &str) -> u64 {
    seed ^ fnv1a(sentence_id.as_bytes())
}
