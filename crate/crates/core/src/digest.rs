use sha2::{Digest, Sha256};

/// Simulated signature: SHA-256 over a key followed by length-prefixed parts.
///
/// Length prefixes keep `("ab", "c")` and `("a", "bc")` distinct.
pub fn keyed_digest(key: &str, parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((key.len() as u64).to_be_bytes());
    hasher.update(key.as_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}
