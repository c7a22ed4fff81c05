//! Deterministic derivation of independent random streams.
//!
//! Every stochastic component receives its own stream keyed by a path of
//! integers (base seed, grid index, run index, subset mask, ...). Streams
//! depend only on that path, never on scheduling, so results are identical
//! for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`, producing a new well-mixed 64-bit seed.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Opens the stream for `seed` extended by `path`.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive(seed, path))
}

// Domain tags keep streams of different purposes apart even when their
// numeric paths coincide.
pub(crate) const TAG_SUBSET: u64 = 0x5355_4253;
pub(crate) const TAG_ENV: u64 = 0x454E_5653;
pub(crate) const TAG_RUN: u64 = 0x5255_4E53;
pub(crate) const TAG_TEST: u64 = 0x5445_5354;
