//! Reproducible random streams.
//!
//! Every stochastic routine takes a `u64` seed and builds a ChaCha8 stream
//! from it. ChaCha is a counter-based generator with a fixed, platform
//! independent output, so `(inputs, seed)` fully determines every sample.
//! Experiments derive one independent stream per replicate by selecting a
//! ChaCha stream id instead of reseeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Stream for a single-shot operation.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the experiment seeded by `seed`.
pub fn rng_for_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed for replicate `index` under purpose `tag`.
///
/// Uses SplitMix64 finalization so nearby `(seed, tag, index)` triples map to
/// unrelated seeds.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
