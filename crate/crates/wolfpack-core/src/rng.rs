//! Deterministic RNG streams derived from a single master seed.
//!
//! Every consumer of randomness (a wolf, an agent, an iteration phase)
//! gets its own stream keyed by a domain label plus integer indices.
//! Streams never share state, so evaluation order and concurrency cannot
//! perturb reproducibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG stream from the master seed.
pub fn stream(master_seed: u64, domain: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(master_seed, domain, indices))
}

/// Derive a single `u64` (e.g. a per-request seed) from the master seed.
pub fn derive_u64(master_seed: u64, domain: &str, indices: &[u64]) -> u64 {
    let d = digest(master_seed, domain, indices);
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn digest(master_seed: u64, domain: &str, indices: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0xff]);
    hasher.update(domain.as_bytes());
    for ix in indices {
        hasher.update([0xfe]);
        hasher.update(ix.to_le_bytes());
    }
    hasher.finalize().into()
}

/// Hex-encoded SHA-256 of arbitrary bytes. Used to pin resource files and
/// cache keys.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
