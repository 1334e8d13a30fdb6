//! Keyed random substreams.
//!
//! Every random draw belongs to a `(seed, stream)` pair; the generator for a
//! pair is ChaCha8 keyed by the seed with the stream id as its nonce, so any
//! sample can be regenerated alone and parallel runs do not depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive an independent seed for a named purpose, so e.g. matrix sampling
/// and the 2x2 oracle never share streams under the same user seed.
pub fn domain_seed(seed: u64, domain: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
