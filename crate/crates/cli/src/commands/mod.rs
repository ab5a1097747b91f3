pub mod serve;
pub mod sync;
pub mod uvgen;
pub mod warp;

use std::path::Path;

use sha2::{Digest, Sha256};

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}
