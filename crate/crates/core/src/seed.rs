//! Splittable seed derivation. A child seed depends only on its parent,
//! a label and an index, so adding siblings never perturbs existing ones.

use sha2::{Digest, Sha256};

pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}
