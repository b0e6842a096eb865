//! Seeded random streams.
//!
//! Every run has one master seed. Components derive independent ChaCha
//! streams from `(master, name, index)` so that the content produced for an
//! item never depends on the order in which items are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a 64-bit seed for a named substream.
pub fn derive_seed(master: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

pub fn substream(master: u64, name: &str, index: u64) -> Rng {
    seeded(derive_seed(master, name, index))
}
