//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a stream keyed by a root seed and
//! a short list of integer ids, so runs are reproducible regardless of the
//! order in which workers execute them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `keys` into a single 64-bit value.
pub fn derive_seed(root: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// ChaCha stream seeded by `root` and selected by `keys`.
pub fn substream(root: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(derive_seed(0, keys));
    rng
}
