//! Seed derivation.
//!
//! Every randomised component draws from its own ChaCha8 stream. The stream
//! seed is the first eight bytes (little endian) of
//! `SHA-256(root_seed.to_le_bytes() || component_name)`, so adding or
//! removing a component never shifts another component's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(root: u64, component: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(component.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn component_rng(root: u64, component: &str) -> ChaCha8Rng {
    seeded_rng(derive_seed(root, component))
}
