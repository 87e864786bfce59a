//! Contributions, moderation, votes and comments.
//!
//! New use cases enter the database only through a contribution. Each
//! submission is screened (validation, nearest existing use case, optional
//! plausibility check) and waits for a moderator. Approval publishes the use
//! case and indexes it in the same store write.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::ontology::{validate_use_case, Provenance, UseCase, UseCaseStatus, ValidationReport};
use crate::providers::{GenerationRequest, Generator};
use crate::rag::select_candidate;
use crate::store::{
    Comment, Contribution, Decision, Plausibility, RetrievalQuery, Screening, Store, StoreError,
    Tally, Vote, VoteValue, MAX_COMMENT_CHARS,
};

pub const MAX_HANDLE_CHARS: usize = 100;

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationReport),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("use case {0} is not published")]
    NotPublished(Uuid),
    #[error("contribution {0} has already been decided")]
    NotPending(Uuid),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityConfig {
    /// Screening flags a submission at or above this similarity.
    pub duplicate_threshold: f64,
    pub screening_top_n: usize,
    /// Ask the generator whether a submission is plausible.
    pub plausibility_check: bool,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        Self {
            duplicate_threshold: 0.95,
            screening_top_n: 5,
            plausibility_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Moderation {
    Approve,
    Reject { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub use_case_id: Uuid,
    pub name: String,
    pub status: UseCaseStatus,
    pub tally: Tally,
    pub net_score: i64,
    pub comment_count: usize,
    pub times_retrieved: u64,
    pub mean_rank: f64,
    pub last_retrieved_at: Option<DateTime<Utc>>,
    /// More down votes than up votes.
    pub flagged: bool,
}

/// Per use case feedback, lowest net score first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub generated_at: DateTime<Utc>,
    pub entries: Vec<FeedbackEntry>,
}

#[derive(Debug, Clone)]
pub struct Community {
    store: Arc<Store>,
    config: CommunityConfig,
    checker: Option<Arc<dyn Generator>>,
}

fn check_handle(kind: &str, handle: &str) -> Result<(), CommunityError> {
    let n = handle.trim().chars().count();
    if n == 0 || n > MAX_HANDLE_CHARS {
        return Err(CommunityError::InvalidInput(format!(
            "{kind} must be 1 to {MAX_HANDLE_CHARS} characters"
        )));
    }
    Ok(())
}

impl Community {
    pub fn new(store: Arc<Store>) -> Self {
        Self {
            store,
            config: CommunityConfig::default(),
            checker: None,
        }
    }

    pub fn with_config(mut self, config: CommunityConfig) -> Self {
        self.config = config;
        self
    }

    /// Generator used for the plausibility check when it is enabled.
    pub fn with_checker(mut self, generator: Arc<dyn Generator>) -> Self {
        self.checker = Some(generator);
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Screens and records a community submission. The use case gets a
    /// fresh id so a submission can never overwrite an existing record.
    pub fn submit_contribution(
        &self,
        use_case: UseCase,
        contributor_handle: &str,
    ) -> Result<Contribution, CommunityError> {
        check_handle("contributor handle", contributor_handle)?;
        let mut uc = use_case;
        uc.id = Uuid::new_v4();
        uc.provenance = Provenance::Contributor {
            contributor_handle: contributor_handle.to_string(),
        };
        self.submit(uc, contributor_handle)
    }

    /// Queues a use case extracted from a document for review, keeping its
    /// derived id and provenance.
    pub fn submit_extracted(&self, use_case: UseCase, document_id: &str) -> Result<Contribution, CommunityError> {
        self.submit(use_case, &format!("document:{document_id}"))
    }

    fn submit(&self, mut uc: UseCase, handle: &str) -> Result<Contribution, CommunityError> {
        let ranges = self.store.ranges();
        let validation = validate_use_case(&uc, &ranges);
        if !validation.valid {
            return Err(CommunityError::ValidationFailed(validation));
        }
        let nearest = self.store.search_text(
            &RetrievalQuery::new(uc.embedded_text()).top(self.config.screening_top_n.max(1)),
        )?;
        let (max_similarity, nearest_use_case_id) = nearest
            .hits
            .first()
            .map_or((-1.0, None), |h| (h.similarity, Some(h.use_case_id)));
        let plausibility = if self.config.plausibility_check {
            self.checker.as_ref().and_then(|g| check_plausibility(g.as_ref(), &uc))
        } else {
            None
        };
        let now = Utc::now();
        uc.status = UseCaseStatus::PendingReview;
        uc.created_at = now;
        uc.updated_at = now;
        let contribution = Contribution {
            id: Uuid::new_v4(),
            submitted: uc,
            contributor_handle: handle.to_string(),
            screening: Screening {
                max_similarity,
                nearest_use_case_id,
                duplicate_flag: max_similarity >= self.config.duplicate_threshold,
                validation,
                plausibility,
            },
            decision: Decision::Pending,
            submitted_at: now,
        };
        let stored = contribution.clone();
        self.store.write(move |s| {
            if s.use_cases.get(&stored.submitted.id).is_some_and(|u| u.is_published()) {
                return Err(StoreError::ValidationFailed(ValidationReport::from_violations(vec![
                    crate::ontology::Violation::new(
                        "id",
                        crate::ontology::ViolationCode::Duplicate,
                        "a published use case already has this id",
                    ),
                ])));
            }
            s.reindex(&stored.submitted, None);
            s.use_cases.insert(stored.submitted.id, stored.submitted.clone());
            s.contributions.insert(stored.id, stored);
            Ok(())
        })?;
        Ok(contribution)
    }

    /// Approves or rejects a pending contribution. Approval publishes and
    /// indexes the use case atomically.
    pub fn moderate(
        &self,
        contribution_id: Uuid,
        action: Moderation,
        moderator: &str,
    ) -> Result<Contribution, CommunityError> {
        check_handle("moderator handle", moderator)?;
        let current = self.store.read();
        let contribution = current
            .contribution(&contribution_id)
            .ok_or_else(|| CommunityError::NotFound(format!("contribution {contribution_id}")))?;
        if !contribution.decision.is_pending() {
            return Err(CommunityError::NotPending(contribution_id));
        }
        let now = Utc::now();
        let (status, decision, vector) = match action {
            Moderation::Approve => {
                let report = validate_use_case(&contribution.submitted, current.ranges());
                if !report.valid {
                    return Err(CommunityError::ValidationFailed(report));
                }
                let v = self
                    .store
                    .embedder()
                    .embed(&contribution.submitted.embedded_text())
                    .map_err(StoreError::Embedding)?;
                let decision = Decision::Approved {
                    moderator: moderator.to_string(),
                    ts: now,
                };
                (UseCaseStatus::Published, decision, Some(v))
            }
            Moderation::Reject { reason } => {
                if reason.trim().is_empty() {
                    return Err(CommunityError::InvalidInput("a rejection needs a reason".into()));
                }
                let decision = Decision::Rejected {
                    moderator: moderator.to_string(),
                    reason,
                    ts: now,
                };
                (UseCaseStatus::Rejected, decision, None)
            }
        };
        drop(current);

        let outcome = self.store.write(move |s| {
            let Some(c) = s.contributions.get(&contribution_id) else {
                return Ok(Err(CommunityError::NotFound(format!("contribution {contribution_id}"))));
            };
            if !c.decision.is_pending() {
                return Ok(Err(CommunityError::NotPending(contribution_id)));
            }
            let mut c = c.clone();
            c.decision = decision;
            c.submitted.status = status;
            c.submitted.updated_at = now;
            let mut uc = s
                .use_cases
                .get(&c.submitted.id)
                .cloned()
                .unwrap_or_else(|| c.submitted.clone());
            uc.status = status;
            uc.updated_at = now;
            s.reindex(&uc, vector);
            s.use_cases.insert(uc.id, uc);
            s.contributions.insert(c.id, c.clone());
            Ok(Ok(c))
        })?;
        outcome
    }

    fn published(&self, entity_id: &Uuid) -> Result<(), CommunityError> {
        match self.store.read().use_case(entity_id) {
            None => Err(CommunityError::NotFound(format!("use case {entity_id}"))),
            Some(uc) if !uc.is_published() => Err(CommunityError::NotPublished(*entity_id)),
            Some(_) => Ok(()),
        }
    }

    /// Records a vote; a second vote by the same voter replaces the first.
    pub fn cast_vote(&self, entity_id: Uuid, voter_handle: &str, value: VoteValue) -> Result<Tally, CommunityError> {
        check_handle("voter handle", voter_handle)?;
        self.published(&entity_id)?;
        let vote = Vote {
            entity_id,
            voter_handle: voter_handle.to_string(),
            value,
            ts: Utc::now(),
        };
        Ok(self.store.write(move |s| {
            s.votes.insert((entity_id, vote.voter_handle.clone()), vote);
            Ok(s.tally(&entity_id))
        })?)
    }

    pub fn add_comment(&self, entity_id: Uuid, author_handle: &str, body: &str) -> Result<Comment, CommunityError> {
        check_handle("author handle", author_handle)?;
        let n = body.trim().chars().count();
        if n == 0 || body.chars().count() > MAX_COMMENT_CHARS {
            return Err(CommunityError::InvalidInput(format!(
                "comment body must be 1 to {MAX_COMMENT_CHARS} characters"
            )));
        }
        self.published(&entity_id)?;
        let comment = Comment {
            id: Uuid::new_v4(),
            entity_id,
            author_handle: author_handle.to_string(),
            body: body.to_string(),
            ts: Utc::now(),
        };
        let stored = comment.clone();
        self.store.write(move |s| {
            s.comments.push(stored);
            Ok(())
        })?;
        Ok(comment)
    }

    pub fn feedback_report(&self) -> FeedbackReport {
        let state = self.store.read();
        let stats = self.store.retrieval_stats();
        let mut entries: Vec<FeedbackEntry> = state
            .use_cases()
            .filter(|uc| uc.is_published())
            .map(|uc| {
                let tally = state.tally(&uc.id);
                let st = stats.get(&uc.id).cloned().unwrap_or_default();
                FeedbackEntry {
                    use_case_id: uc.id,
                    name: uc.name.clone(),
                    status: uc.status,
                    tally,
                    net_score: tally.up as i64 - tally.down as i64,
                    comment_count: state.comments_for(&uc.id).count(),
                    times_retrieved: st.times_retrieved,
                    mean_rank: st.mean_rank,
                    last_retrieved_at: st.last_retrieved_at,
                    flagged: tally.down > tally.up,
                }
            })
            .collect();
        entries.sort_by(|a, b| a.net_score.cmp(&b.net_score).then_with(|| a.use_case_id.cmp(&b.use_case_id)));
        FeedbackReport {
            generated_at: Utc::now(),
            entries,
        }
    }
}

#[derive(Deserialize)]
struct Verdict {
    plausible: bool,
    #[serde(default)]
    rationale: String,
}

fn check_plausibility(generator: &dyn Generator, uc: &UseCase) -> Option<Plausibility> {
    let prompt = format!(
        "A community member submitted the following 6G use case for a public knowledge database. \
Judge whether its communication processes and network specifications are technically plausible. \
Answer with a JSON object {{\"plausible\": true or false, \"rationale\": \"one sentence\"}} inside a ```json fenced block.\n\n{}",
        serde_json::to_string(uc).ok()?
    );
    let response = match generator.generate(&GenerationRequest::new(prompt)) {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!("plausibility check skipped: {e}");
            return None;
        }
    };
    let candidate = select_candidate(&response.text)
        .map(|c| c.text)
        .unwrap_or(&response.text);
    let start = candidate.find('{')?;
    let end = candidate.rfind('}')?;
    let verdict: Verdict = serde_json::from_str(candidate.get(start..=end)?).ok()?;
    Some(Plausibility {
        plausible: verdict.plausible,
        rationale: verdict.rationale,
        provider_id: response.provider_id,
    })
}
