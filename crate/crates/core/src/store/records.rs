use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::ontology::{UseCase, ValidationReport};

pub const MAX_COMMENT_CHARS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteValue {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub entity_id: Uuid,
    pub voter_handle: String,
    pub value: VoteValue,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub up: u64,
    pub down: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: Uuid,
    pub entity_id: Uuid,
    pub author_handle: String,
    pub body: String,
    pub ts: DateTime<Utc>,
}

/// A source document submitted for knowledge extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: Option<String>,
    pub text: String,
    pub submitted_at: DateTime<Utc>,
}

/// One row per hit of a logged retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalLogRow {
    pub ts: DateTime<Utc>,
    pub query_hash: String,
    pub use_case_id: Uuid,
    pub rank: usize,
    pub similarity: f64,
}

/// Verdict of the optional generator-backed plausibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plausibility {
    pub plausible: bool,
    pub rationale: String,
    pub provider_id: String,
}

/// Automatic screening result attached to every contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// −1 when the store held nothing to compare against.
    pub max_similarity: f64,
    pub nearest_use_case_id: Option<Uuid>,
    pub duplicate_flag: bool,
    pub validation: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility: Option<Plausibility>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Decision {
    Pending,
    Approved {
        moderator: String,
        ts: DateTime<Utc>,
    },
    Rejected {
        moderator: String,
        reason: String,
        ts: DateTime<Utc>,
    },
}

impl Decision {
    pub fn is_pending(&self) -> bool {
        matches!(self, Decision::Pending)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub id: Uuid,
    pub submitted: UseCase,
    pub contributor_handle: String,
    pub screening: Screening,
    pub decision: Decision,
    pub submitted_at: DateTime<Utc>,
}
