//! Reproducible random streams.
//!
//! Every Monte Carlo worker derives its generator from
//! `(master_seed, purpose, stream_index)`. ChaCha streams are seekable and
//! independent per stream index, so ensemble results do not depend on how
//! paths are distributed over threads: path `i` always consumes stream `i`
//! of the purpose-keyed cipher.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a on the purpose tag, to separate key material of unrelated
/// subsystems (paths, permutation tests, nested estimators, ...).
fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic generator for worker `stream` of subsystem `purpose`.
pub fn stream_rng(master_seed: u64, purpose: &str, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(purpose).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
