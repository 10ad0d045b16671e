//! Seeded random streams.
//!
//! Every stochastic stage draws from a ChaCha8 generator keyed by a root seed
//! and a stream number, so work split across threads stays reproducible
//! regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-level stream, e.g. (iteration, episode).
pub fn substream(seed: u64, outer: u64, inner: u64) -> Rng {
    stream(seed ^ outer.wrapping_mul(0x9E37_79B9_7F4A_7C15), inner)
}
