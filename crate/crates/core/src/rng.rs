//! Seeded randomness.
//!
//! All randomness in the crate comes from ChaCha20 (`rand_chacha`), a
//! counter-based stream cipher generator whose output is specified bit for
//! bit and therefore identical on every platform. A `(seed, stream)` pair
//! selects an independent sequence: the seed keys the cipher and the stream
//! id picks a separate 64-bit nonce, so sub-tasks (one graph, one fold, one
//! dropout mask sequence) can draw numbers without sharing state.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit id for a string, for deriving per-name streams.
pub fn name_stream(name: &str) -> u64 {
    // FNV-1a; only needs to be stable, not collision resistant.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A seed for a sub-task identified by `path` (for example fold, epoch,
/// step), drawn from stream `path[0]` of `seed`.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    use rand::Rng as _;
    let mut r = stream(seed, path.first().copied().unwrap_or(0));
    let mut out = r.random::<u64>();
    for &p in path.iter().skip(1) {
        out = stream(out, p).random();
    }
    out
}
