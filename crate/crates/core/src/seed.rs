//! Named random sub-streams derived from one root seed.
//!
//! Every consumer of randomness (fold assignment, validation split, weight
//! initialization, batch shuffling) asks for its own stream by name, so adding
//! a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives a child seed from `parent`, a stream name and a list of indices.
pub fn derive(parent: u64, name: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn stream(parent: u64, name: &str, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(parent, name, indices))
}
