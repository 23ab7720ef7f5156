//! Deterministic RNG streams.
//!
//! Every randomized task derives its own generator from a master seed and a
//! task path, so work can be distributed over threads without any scheduling
//! order leaking into the output. The derivation is a fixed SplitMix64 chain;
//! changing it changes every seeded artifact, so treat it as a wire format.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a task path into a single 64-bit stream seed.
pub fn stream_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(GOLDEN_GAMMA | 1);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha stream for the given master seed and task path.
pub fn stream(master: u64, path: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stream_seed(master, path))
}

/// FNV-1a over a byte slice; used to fingerprint asset files.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
