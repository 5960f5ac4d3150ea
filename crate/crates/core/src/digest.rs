//! Stable digests of configuration values and output files.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config values serialize to JSON");
    hex_digest(&json)
}

/// First four bytes of [`config_digest`], as stored in checkpoints.
pub fn short_digest<T: Serialize>(value: &T) -> u32 {
    let json = serde_json::to_vec(value).expect("config values serialize to JSON");
    let hash = Sha256::digest(&json);
    u32::from_le_bytes([hash[0], hash[1], hash[2], hash[3]])
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
