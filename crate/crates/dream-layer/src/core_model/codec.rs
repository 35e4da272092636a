//! Canonical record codec: one record per line, JSON with lexicographically
//! sorted keys. Byte-stable across runs; every persistence and CLI surface
//! uses it.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("encode failed: {0}")]
    Encode(String),
    #[error("decode failed at line {line}, column {column}: {message}")]
    Decode {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Encodes a record as a single canonical JSON line (sorted keys, no
/// trailing newline).
pub fn canonical_encode<T: Serialize>(record: &T) -> Result<String, CanonicalError> {
    // serde_json::Value maps are BTreeMap-backed, so key order is sorted.
    let value = serde_json::to_value(record).map_err(|e| CanonicalError::Encode(e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| CanonicalError::Encode(e.to_string()))
}

/// Decodes a single canonical record. Errors carry the offending position.
pub fn canonical_decode<T: DeserializeOwned>(line: &str) -> Result<T, CanonicalError> {
    serde_json::from_str(line).map_err(|e| CanonicalError::Decode {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Encodes many records, one per line.
pub fn encode_lines<T: Serialize>(records: &[T]) -> Result<String, CanonicalError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_encode(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Decodes a line-delimited record stream, skipping blank lines.
pub fn decode_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, CanonicalError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(canonical_decode)
        .collect()
}
