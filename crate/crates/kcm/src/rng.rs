//! Counter-based, splittable random number streams.
//!
//! Every stream is keyed by (master seed, purpose, replica, site, ...), so
//! replicas and sites draw from independent reproducible streams regardless
//! of thread scheduling. Keys are mixed into a 256-bit ChaCha seed with a
//! SplitMix64 finalizer chain.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes; each gets a disjoint key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    ClockRings,
    InitialConfigA,
    InitialConfigB,
    Generic,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::ClockRings => 0x434c4f434b,
            Purpose::InitialConfigA => 0x494e49545f41,
            Purpose::InitialConfigB => 0x494e49545f42,
            Purpose::Generic => 0x47454e45524943,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic ChaCha8 stream for the given key words.
pub fn stream(master_seed: u64, purpose: Purpose, words: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(master_seed ^ 0x6b636d5f726e67); // "kcm_rng"
    state = splitmix64(state ^ purpose.tag());
    for &w in words {
        state = splitmix64(state ^ splitmix64(w));
    }
    let mut seed = [0u8; 32];
    let mut s = state;
    for chunk in seed.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Derived master seed for one replica of a replicated task.
pub fn replica_seed(master_seed: u64, replica: u64) -> u64 {
    splitmix64(splitmix64(master_seed ^ 0x7265706c696361) ^ replica)
}
