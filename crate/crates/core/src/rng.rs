//! Seeded random streams.
//!
//! Every consumer draws from ChaCha8 keyed by `(seed, stream)`. ChaCha is
//! a counter-based generator, so stream `r` is fully determined by the seed
//! and `r` regardless of how many other streams exist or in which order
//! they are consumed. Bootstrap replicate `r` always uses stream `r`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
