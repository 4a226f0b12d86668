use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ItemId, ReviewItem};

/// Predecessor hash of the first entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditAction {
    Enqueue,
    Accept,
    Edit,
    Reject,
}

/// The hashed part of an audit entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBody {
    pub seq: u64,
    pub item_id: ItemId,
    pub actor: String,
    pub action: AuditAction,
    pub before: Option<ReviewItem>,
    pub after: ReviewItem,
    pub timestamp: DateTime<Utc>,
    pub prev_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(flatten)]
    pub body: AuditBody,
    /// Hex SHA-256 of the serialized body, which includes `prev_hash`.
    pub hash: String,
}

impl AuditEntry {
    pub fn seal(body: AuditBody) -> Self {
        let hash = body_hash(&body);
        Self { body, hash }
    }
}

pub fn body_hash(body: &AuditBody) -> String {
    let bytes = serde_json::to_vec(body).expect("audit body serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("audit entry {index}: sequence number {found}, expected {expected}")]
    Sequence {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("audit entry {index}: predecessor hash does not match")]
    BrokenLink { index: usize },
    #[error("audit entry {index}: content does not match its hash")]
    Tampered { index: usize },
}

/// Checks that entries are numbered from 0, each hash covers its body and
/// each entry names its predecessor's hash.
pub fn verify_chain(entries: &[AuditEntry]) -> Result<(), ChainError> {
    let mut prev = GENESIS_HASH;
    for (index, entry) in entries.iter().enumerate() {
        if entry.body.seq != index as u64 {
            return Err(ChainError::Sequence {
                index,
                expected: index as u64,
                found: entry.body.seq,
            });
        }
        if entry.body.prev_hash != prev {
            return Err(ChainError::BrokenLink { index });
        }
        if body_hash(&entry.body) != entry.hash {
            return Err(ChainError::Tampered { index });
        }
        prev = &entry.hash;
    }
    Ok(())
}
