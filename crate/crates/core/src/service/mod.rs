//! HTTP API over the knowledge base and generation engine.
//!
//! All routes live under `/api/v1`. Errors are JSON [`ApiError`] bodies with
//! a stable `code`; every response echoes an `X-Request-Id` header. Operator
//! routes under `/api/v1/admin` require the `X-Operator-Key` header.

mod error;
mod handlers;
mod middleware;

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub use error::{ApiError, ApiJson, ERROR_CODES};
pub use handlers::{
    ContributionReceipt, Page, SimilarUseCase, SpecifyAudit, SpecifyResponse, UseCaseDetail,
    DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE, MAX_SPECIFY_N,
};
pub use middleware::{RateLimiter, RequestId, REQUEST_ID_HEADER};

use crate::community::Community;
use crate::ontology::SpecRangeConfig;
use crate::rag::{ChunkFailure, RagEngine};
use crate::store::{Document, StoreError};

pub const OPERATOR_KEY_HEADER: &str = "x-operator-key";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Admin routes reject every request when unset.
    pub operator_key: Option<String>,
    /// `"*"` allows any origin.
    pub cors_allowed_origins: Vec<String>,
    pub specify_deadline_ms: u64,
    /// `/specify` calls per minute per client address; 0 disables the limit.
    pub specify_rate_limit_per_minute: u32,
    pub max_ingest_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            operator_key: None,
            cors_allowed_origins: vec!["*".into()],
            specify_deadline_ms: 120_000,
            specify_rate_limit_per_minute: 10,
            max_ingest_bytes: 2 * 1024 * 1024,
        }
    }
}

impl ServiceConfig {
    pub fn specify_deadline(&self) -> Duration {
        Duration::from_millis(self.specify_deadline_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Completed,
    Failed,
}

/// Progress and result of an asynchronous document ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestJob {
    pub job_id: Uuid,
    pub document_id: String,
    pub status: JobStatus,
    pub chunks_total: usize,
    pub chunks_done: usize,
    /// Pending contributions created from the extracted drafts.
    pub contribution_ids: Vec<Uuid>,
    pub failures: Vec<ChunkFailure>,
    /// Extracted drafts that could not be queued.
    pub draft_errors: Vec<String>,
    pub error: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
}

impl IngestJob {
    fn queued(document_id: String) -> Self {
        Self {
            job_id: Uuid::new_v4(),
            document_id,
            status: JobStatus::Queued,
            chunks_total: 0,
            chunks_done: 0,
            contribution_ids: Vec::new(),
            failures: Vec::new(),
            draft_errors: Vec::new(),
            error: None,
            submitted_at: Utc::now(),
            finished_at: None,
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    pub engine: Arc<RagEngine>,
    pub community: Community,
    pub config: ServiceConfig,
    limiter: RateLimiter,
    jobs: Mutex<BTreeMap<Uuid, IngestJob>>,
    ranges_path: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Arc<RagEngine>, community: Community, config: ServiceConfig) -> Self {
        Self {
            limiter: RateLimiter::new(config.specify_rate_limit_per_minute),
            engine,
            community,
            config,
            jobs: Mutex::new(BTreeMap::new()),
            ranges_path: None,
        }
    }

    /// Where accepted range changes are written.
    pub fn with_ranges_path(mut self, path: PathBuf) -> Self {
        self.ranges_path = Some(path);
        self
    }

    pub fn job(&self, id: &Uuid) -> Option<IngestJob> {
        self.jobs.lock().get(id).cloned()
    }

    fn update_job(&self, id: Uuid, f: impl FnOnce(&mut IngestJob)) {
        if let Some(job) = self.jobs.lock().get_mut(&id) {
            f(job);
        }
    }

    /// Stores the document, extracts drafts and queues each for moderation.
    pub fn run_ingest(&self, job_id: Uuid, doc: Document) {
        self.update_job(job_id, |j| j.status = JobStatus::Running);
        let result = self
            .engine
            .store()
            .put_document(doc.clone())
            .map_err(|e| e.to_string())
            .and_then(|_| {
                self.engine
                    .extract(&doc.id, &doc.text, |done, total| {
                        self.update_job(job_id, |j| {
                            j.chunks_done = done;
                            j.chunks_total = total;
                        })
                    })
                    .map_err(|e| e.to_string())
            });
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                tracing::warn!(%job_id, "ingest failed: {e}");
                self.update_job(job_id, |j| {
                    j.status = JobStatus::Failed;
                    j.error = Some(e);
                    j.finished_at = Some(Utc::now());
                });
                return;
            }
        };
        let mut ids = Vec::new();
        let mut draft_errors = Vec::new();
        for uc in outcome.use_cases {
            let name = uc.name.clone();
            match self.community.submit_extracted(uc, &doc.id) {
                Ok(c) => ids.push(c.id),
                Err(e) => draft_errors.push(format!("draft {name:?} not queued: {e}")),
            }
        }
        self.update_job(job_id, |j| {
            j.status = JobStatus::Completed;
            j.chunks_total = outcome.chunks;
            j.chunks_done = outcome.chunks;
            j.contribution_ids = ids;
            j.failures = outcome.failures;
            j.draft_errors = draft_errors;
            j.finished_at = Some(Utc::now());
        });
    }

    /// Installs new ranges, persisting them to the ranges file if one is
    /// configured. Conflicts with published use cases are `range_conflict`.
    fn apply_ranges(&self, ranges: SpecRangeConfig) -> Result<(), ApiError> {
        let persisted = ranges.clone();
        if let Err(offenders) = self.engine.store().set_ranges(ranges)? {
            return Err(ApiError::new(
                "range_conflict",
                format!("{} published use case(s) would no longer validate", offenders.len()),
            )
            .with_details(serde_json::json!({ "offenders": offenders })));
        }
        if let Some(path) = &self.ranges_path {
            let json = serde_json::to_string_pretty(&persisted).expect("ranges serialize");
            std::fs::write(path, json)
                .map_err(|e| ApiError::from(StoreError::StorageUnavailable(e.to_string())))?;
        }
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    use handlers::*;
    let body_limit = state.config.max_ingest_bytes + 64 * 1024;
    let specify_route = Router::new()
        .route("/api/v1/specify", post(specify))
        .route_layer(axum::middleware::from_fn_with_state(state.clone(), middleware::rate_limit));
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/use-cases", get(list_use_cases).post(contribute))
        .route("/api/v1/use-cases/{id}", get(get_use_case))
        .route("/api/v1/use-cases/{id}/votes", post(vote))
        .route("/api/v1/use-cases/{id}/comments", post(comment))
        .route("/api/v1/admin/ingest", post(ingest))
        .route("/api/v1/admin/ingest/{job_id}", get(ingest_status))
        .route("/api/v1/admin/contributions", get(list_contributions))
        .route("/api/v1/admin/contributions/{id}/decision", post(decide))
        .route("/api/v1/admin/feedback", get(feedback))
        .route("/api/v1/admin/ranges", get(get_ranges).put(put_ranges))
        .merge(specify_route)
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(axum::middleware::from_fn_with_state(state.clone(), middleware::cors))
        .layer(axum::middleware::from_fn(middleware::request_id))
        .with_state(state)
}

/// Serves the API on `listener` until `shutdown` resolves, then flushes the
/// retrieval log.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone());
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await?;
    if let Err(e) = state.engine.store().flush() {
        tracing::warn!("retrieval log flush on shutdown failed: {e}");
    }
    Ok(())
}
