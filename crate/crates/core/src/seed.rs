//! Stable seed derivation. Seeds depend only on tuple identity, never on
//! scheduling, so resumed or parallel runs reproduce the same trials.

use sha2::{Digest, Sha256};

/// Hashes length-prefixed parts into a 64-bit seed.
pub fn derive(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn trial_seed(base_seed: u64, challenge_id: &str, agent_id: &str, trial_index: usize) -> u64 {
    derive(&[
        &base_seed.to_le_bytes(),
        challenge_id.as_bytes(),
        agent_id.as_bytes(),
        &(trial_index as u64).to_le_bytes(),
    ])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Combines two seeds (splitmix64 finalizer over their xor-rotation).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
