//! Hierarchical seed derivation: master seed -> stage -> subject -> prompt.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a parent seed and a path of labels.
pub fn derive_seed(parent: u64, path: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    for part in path {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

pub fn rng_for(parent: u64, path: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, path))
}

/// Uniform value in [0, 1) that is a pure function of the seed and path.
pub fn unit_interval(parent: u64, path: &[&str]) -> f64 {
    (derive_seed(parent, path) >> 11) as f64 / (1u64 << 53) as f64
}

/// Hex SHA-256 of arbitrary bytes; used for config and input hashes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
