//! Seeded random streams.
//!
//! Every Monte Carlo trial draws from its own ChaCha stream derived from a
//! master seed and a trial index, so results do not depend on thread count
//! or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream `index` of the generator seeded with `master`.
pub fn substream(master: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, used when a sweep point needs its own family
/// of trial substreams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
