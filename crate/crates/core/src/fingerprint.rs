//! Content fingerprints for configs and data files.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Hex SHA-256 of raw bytes.
pub fn of_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn of_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(of_bytes(&serde_json::to_vec(value)?))
}
