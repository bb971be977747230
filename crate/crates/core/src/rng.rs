//! Counter-based seeding.
//!
//! Every realization owns a key derived from `(master_seed, index)`; the
//! problem generator, the policy and the environment each read a separate
//! ChaCha stream under that key, so any realization can be replayed in
//! isolation and policies compared under common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams used by one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Problem = 0,
    Policy = 1,
    Environment = 2,
    Context = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed and a realization index into a per-realization key.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// The random stream `stream` of realization `index` under `master`.
pub fn stream_rng(master: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    keyed_rng(mix_seed(master, index), stream)
}

/// Stream `stream` under an already-mixed key.
pub fn keyed_rng(key: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream as u64);
    rng
}
