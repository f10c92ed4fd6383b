//! Seed derivation and counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed and
//! a small tuple of integer coordinates (trial index, vertex index, ...), so
//! results do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a list of coordinates.
///
/// Stable across platforms and releases (unlike `std::hash`).
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix(seed), |acc, &c| splitmix(acc ^ splitmix(c)))
}

/// A ChaCha8 generator keyed by `seed` on an independent `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Purposes for which a trial seed is split into sub-seeds.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Purpose {
    Latents = 1,
    Edges = 2,
    Optimizer = 3,
    Lemma = 4,
}

pub(crate) fn sub_seed(seed: u64, purpose: Purpose) -> u64 {
    derive_seed(seed, &[purpose as u64])
}
