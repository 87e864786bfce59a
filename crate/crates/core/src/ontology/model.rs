use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::spec::NetworkSpecification;

pub const MAX_NAME_CHARS: usize = 200;
pub const MAX_DESCRIPTION_CHARS: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Transmit,
    Receive,
}

/// One wireless connection with a single purpose inside a use case.
///
/// The three metadata attributes (`is_real_time`, `direction`,
/// `message_type`) come before the specification so that a generator can
/// reason about them first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunicationProcess {
    pub id: Uuid,
    pub name: String,
    pub description: String,
    pub is_real_time: bool,
    pub direction: Direction,
    pub message_type: String,
    pub specification: NetworkSpecification,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Provenance {
    SeedDocument { document_id: String },
    Contributor { contributor_handle: String },
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCaseStatus {
    Draft,
    PendingReview,
    Published,
    Rejected,
}

impl UseCaseStatus {
    /// Accepts the canonical names plus the short `pending` form used in
    /// query strings.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "draft" => Some(Self::Draft),
            "pending" | "pending_review" => Some(Self::PendingReview),
            "published" => Some(Self::Published),
            "rejected" => Some(Self::Rejected),
            _ => None,
        }
    }
}

fn default_provenance() -> Provenance {
    Provenance::Generated
}

fn default_status() -> UseCaseStatus {
    UseCaseStatus::Draft
}

/// A networked application and the communication processes it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UseCase {
    pub id: Uuid,
    pub name: String,
    pub description: String,
    pub processes: Vec<CommunicationProcess>,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(default = "default_status")]
    pub status: UseCaseStatus,
    #[serde(default = "Utc::now")]
    pub created_at: DateTime<Utc>,
    #[serde(default = "Utc::now")]
    pub updated_at: DateTime<Utc>,
}

impl UseCase {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        let now = Utc::now();
        Self {
            id: Uuid::new_v4(),
            name: name.into(),
            description: description.into(),
            processes: Vec::new(),
            provenance: Provenance::Generated,
            status: UseCaseStatus::Draft,
            created_at: now,
            updated_at: now,
        }
    }

    pub fn with_process(mut self, process: CommunicationProcess) -> Self {
        self.processes.push(process);
        self
    }

    pub fn with_status(mut self, status: UseCaseStatus) -> Self {
        self.status = status;
        self
    }

    /// Text used for semantic matching: name, blank line, description.
    pub fn embedded_text(&self) -> String {
        embedded_text(&self.name, &self.description)
    }

    pub fn is_published(&self) -> bool {
        self.status == UseCaseStatus::Published
    }
}

pub fn embedded_text(name: &str, description: &str) -> String {
    format!("{name}\n\n{description}")
}

impl CommunicationProcess {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        is_real_time: bool,
        direction: Direction,
        message_type: impl Into<String>,
        specification: NetworkSpecification,
    ) -> Self {
        Self {
            id: Uuid::new_v4(),
            name: name.into(),
            description: description.into(),
            is_real_time,
            direction,
            message_type: message_type.into(),
            specification,
        }
    }
}
