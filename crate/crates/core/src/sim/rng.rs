//! Random stream derivation.
//!
//! Each replication gets a key derived from the run seed; inside a
//! replication every queue owns three independent ChaCha8 streams (exogenous
//! arrivals, service times, routing decisions). Changing one queue's rates
//! therefore leaves every other stream's draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Arrival = 0,
    Service = 1,
    Routing = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for replication `rep` of a run seeded with `seed`.
pub fn replication_key(seed: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(rep.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn stream(key: u64, queue: usize, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(queue as u64 * 3 + kind as u64);
    rng
}
