//! Reproducible random streams.
//!
//! Every sample in a sweep draws from its own ChaCha8 stream selected by
//! `(seed, index)`, so results do not depend on how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Independent stream for sample `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Two-level substream, e.g. `(seed, n, sample)`.
pub fn substream2(seed: u64, outer: u64, inner: u64) -> SampleRng {
    // Outer index folded into the seed with a SplitMix64 step.
    let mut z = seed ^ outer.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    substream(z, inner)
}
