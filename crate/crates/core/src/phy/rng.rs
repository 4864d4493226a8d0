use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed for one `(trial, stream)` pair. Streams never share
/// generator state, so trials and sub-streams can run in any order.
pub fn stream_seed(base_seed: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(trial.rotate_left(32) ^ splitmix64(stream)))
}

pub fn stream_rng(base_seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base_seed, trial, stream))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
