use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use super::error::{ApiError, ApiJson};
use super::{AppState, IngestJob, JobStatus, OPERATOR_KEY_HEADER};
use crate::community::Moderation;
use crate::ontology::{
    CommunicationProcess, SpecRangeConfig, UseCase, UseCaseStatus, ValidationReport, Violation,
    ViolationCode, MAX_DESCRIPTION_CHARS, MAX_NAME_CHARS,
};
use crate::rag::{process_radar, ProcessRadar, SpecifyRequest};
use crate::store::{query_hash, Comment, Contribution, Document, Tally, VoteValue};

type ApiResult<T> = Result<T, ApiError>;

pub const MAX_PAGE_SIZE: usize = 100;
pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_SPECIFY_N: usize = 50;

/// Constant-time comparison of the supplied key with the configured one.
fn key_matches(state: &AppState, supplied: &str) -> bool {
    let Some(expected) = state.config.operator_key.as_deref() else {
        return false;
    };
    let (a, b) = (expected.as_bytes(), supplied.as_bytes());
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn supplied_key(headers: &HeaderMap) -> Option<&str> {
    headers.get(OPERATOR_KEY_HEADER).and_then(|v| v.to_str().ok())
}

fn require_operator(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    match supplied_key(headers) {
        Some(k) if key_matches(state, k) => Ok(()),
        Some(_) => Err(ApiError::new("unauthorized", "invalid operator key")),
        None => Err(ApiError::new("unauthorized", "operator key required")),
    }
}

fn is_operator(state: &AppState, headers: &HeaderMap) -> ApiResult<bool> {
    match supplied_key(headers) {
        None => Ok(false),
        Some(k) if key_matches(state, k) => Ok(true),
        Some(_) => Err(ApiError::new("unauthorized", "invalid operator key")),
    }
}

fn violation(path: &str, code: ViolationCode, detail: impl Into<String>) -> Violation {
    Violation::new(path, code, detail)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new("storage_unavailable", format!("request worker failed: {e}")))
}

pub async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let s = state.engine.store().read();
    Json(json!({
        "status": "ok",
        "use_cases": s.use_cases().count(),
        "published": s.index().len(),
        "revision": s.revision(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecifyBody {
    #[serde(default)]
    name: String,
    description: String,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    provider_id: Option<String>,
    #[serde(default)]
    template_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimilarUseCase {
    pub use_case_id: Uuid,
    pub name: String,
    pub description: String,
    pub similarity: f64,
    pub rank: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpecifyAudit {
    pub raw_model_text: String,
    pub template_id: String,
    pub prompt_chars: usize,
    pub contexts_used: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpecifyResponse {
    pub processes: Vec<CommunicationProcess>,
    pub radar: Vec<ProcessRadar>,
    pub similar_use_cases: Vec<SimilarUseCase>,
    pub validation: ValidationReport,
    pub provider_id: String,
    pub retry_count: usize,
    pub audit: SpecifyAudit,
}

pub async fn specify(
    State(state): State<Arc<AppState>>,
    ApiJson(body): ApiJson<SpecifyBody>,
) -> ApiResult<Json<SpecifyResponse>> {
    let mut v = Vec::new();
    let desc_len = body.description.chars().count();
    if body.description.trim().is_empty() {
        v.push(violation("description", ViolationCode::Empty, "must not be empty"));
    } else if desc_len > MAX_DESCRIPTION_CHARS {
        v.push(violation(
            "description",
            ViolationCode::OutOfRange,
            format!("{desc_len} characters, at most {MAX_DESCRIPTION_CHARS} allowed"),
        ));
    }
    if body.name.chars().count() > MAX_NAME_CHARS {
        v.push(violation(
            "name",
            ViolationCode::OutOfRange,
            format!("at most {MAX_NAME_CHARS} characters allowed"),
        ));
    }
    let n = body.n.unwrap_or(crate::store::DEFAULT_TOP_N);
    if !(1..=MAX_SPECIFY_N).contains(&n) {
        v.push(violation("n", ViolationCode::OutOfRange, format!("must lie in 1..={MAX_SPECIFY_N}")));
    }
    if !v.is_empty() {
        return Err(ApiError::validation(ValidationReport::from_violations(v)));
    }

    let request = SpecifyRequest {
        name: body.name,
        description: body.description,
        n,
        template_id: body.template_id,
        provider_id: body.provider_id,
    };
    let engine = state.engine.clone();
    let task = tokio::task::spawn_blocking(move || engine.generate_specification(&request));
    let outcome = match tokio::time::timeout(state.config.specify_deadline(), task).await {
        Err(_) => {
            return Err(ApiError::new(
                "deadline_exceeded",
                format!("no answer within {} ms", state.config.specify_deadline_ms),
            ))
        }
        Ok(Err(e)) => return Err(ApiError::new("storage_unavailable", format!("request worker failed: {e}"))),
        Ok(Ok(r)) => r?,
    };

    let store = state.engine.store().read();
    let ranges = store.ranges().clone();
    let similar_use_cases = outcome
        .similar_use_cases
        .hits
        .iter()
        .filter_map(|h| {
            store.use_case(&h.use_case_id).map(|uc| SimilarUseCase {
                use_case_id: uc.id,
                name: uc.name.clone(),
                description: uc.description.clone(),
                similarity: h.similarity,
                rank: h.rank,
            })
        })
        .collect();
    Ok(Json(SpecifyResponse {
        radar: outcome.processes.iter().map(|p| process_radar(p, &ranges)).collect(),
        processes: outcome.processes,
        similar_use_cases,
        validation: outcome.validation,
        provider_id: outcome.provider_id,
        retry_count: outcome.retry_count,
        audit: SpecifyAudit {
            raw_model_text: outcome.raw_model_text,
            template_id: outcome.prompt.template_id,
            prompt_chars: outcome.prompt.rendered.chars().count(),
            contexts_used: outcome.prompt.contexts.len(),
        },
    }))
}

fn query_usize(q: &HashMap<String, String>, key: &str, default: usize) -> ApiResult<usize> {
    match q.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::bad_request(format!("{key} must be a non-negative integer"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

pub async fn list_use_cases(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Page<UseCase>>> {
    let Query(q) = query?;
    let status = match q.get("status").map(String::as_str) {
        None | Some("") => UseCaseStatus::Published,
        Some(s) => UseCaseStatus::parse(s).ok_or_else(|| ApiError::bad_request(format!("unknown status {s:?}")))?,
    };
    if status != UseCaseStatus::Published && !is_operator(&state, &headers)? {
        return Err(ApiError::new("forbidden", "only operators may list unpublished use cases"));
    }
    let page = query_usize(&q, "page", 1)?;
    let page_size = query_usize(&q, "page_size", DEFAULT_PAGE_SIZE)?;
    if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page must be at least 1 and page_size in 1..={MAX_PAGE_SIZE}"
        )));
    }
    let all = state.engine.store().list_use_cases(Some(status));
    let total = all.len();
    let items = all
        .into_iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .collect();
    Ok(Json(Page {
        items,
        page,
        page_size,
        total,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UseCaseDetail {
    pub use_case: UseCase,
    pub tally: Tally,
    pub comments: Vec<Comment>,
    pub radar: Vec<ProcessRadar>,
}

pub async fn get_use_case(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    id: Result<Path<Uuid>, PathRejection>,
) -> ApiResult<Json<UseCaseDetail>> {
    let Path(id) = id?;
    let store = state.engine.store().read();
    let uc = store
        .use_case(&id)
        .filter(|uc| uc.is_published())
        .cloned();
    let uc = match uc {
        Some(uc) => uc,
        None if is_operator(&state, &headers)? => store
            .use_case(&id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("use case {id}")))?,
        None => return Err(ApiError::not_found(format!("use case {id}"))),
    };
    let ranges = store.ranges();
    Ok(Json(UseCaseDetail {
        radar: uc.processes.iter().map(|p| process_radar(p, ranges)).collect(),
        tally: store.tally(&id),
        comments: store.comments_for(&id).cloned().collect(),
        use_case: uc,
    }))
}

/// Walks a contribution body by hand so that every problem is reported
/// with the path of the form field it belongs to.
fn contribution_from_value(body: &Value) -> Result<(UseCase, String), ApiError> {
    use crate::rag::parse_process_value;
    let Value::Object(map) = body else {
        return Err(ApiError::validation(ValidationReport::from_violations(vec![violation(
            "",
            ViolationCode::Invalid,
            "expected a JSON object",
        )])));
    };
    let mut v = Vec::new();
    for key in map.keys() {
        if !["contributor_handle", "name", "description", "processes"].contains(&key.as_str()) {
            v.push(violation(key, ViolationCode::Unknown, "unknown field"));
        }
    }
    let string = |field: &str, v: &mut Vec<Violation>| match map.get(field) {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => {
            v.push(violation(field, ViolationCode::Missing, "required"));
            String::new()
        }
        Some(_) => {
            v.push(violation(field, ViolationCode::Invalid, "expected a string"));
            String::new()
        }
    };
    let handle = string("contributor_handle", &mut v);
    let name = string("name", &mut v);
    let description = string("description", &mut v);
    let mut processes = Vec::new();
    match map.get("processes") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                if let Some(p) = parse_process_value(item, i, &format!("processes[{i}]"), &mut v) {
                    processes.push(p);
                }
            }
        }
        None | Some(Value::Null) => v.push(violation("processes", ViolationCode::Missing, "required")),
        Some(_) => v.push(violation("processes", ViolationCode::Invalid, "expected an array")),
    }
    if !v.is_empty() {
        return Err(ApiError::validation(ValidationReport::from_violations(v)));
    }
    let mut uc = UseCase::new(name, description);
    uc.processes = processes;
    Ok((uc, handle))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContributionReceipt {
    pub contribution_id: Uuid,
    pub use_case_id: Uuid,
    pub decision: String,
    pub screening: crate::store::Screening,
}

pub async fn contribute(
    State(state): State<Arc<AppState>>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult<(StatusCode, Json<ContributionReceipt>)> {
    let (uc, handle) = contribution_from_value(&body)?;
    let community = state.community.clone();
    let c = blocking(move || community.submit_contribution(uc, &handle)).await??;
    Ok((
        StatusCode::ACCEPTED,
        Json(ContributionReceipt {
            contribution_id: c.id,
            use_case_id: c.submitted.id,
            decision: "pending".into(),
            screening: c.screening,
        }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteBody {
    voter_handle: String,
    value: VoteValue,
}

pub async fn vote(
    State(state): State<Arc<AppState>>,
    id: Result<Path<Uuid>, PathRejection>,
    ApiJson(body): ApiJson<VoteBody>,
) -> ApiResult<Json<Value>> {
    let Path(id) = id?;
    let community = state.community.clone();
    let tally = blocking(move || community.cast_vote(id, &body.voter_handle, body.value)).await??;
    Ok(Json(json!({ "use_case_id": id, "tally": tally })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentBody {
    author_handle: String,
    body: String,
}

pub async fn comment(
    State(state): State<Arc<AppState>>,
    id: Result<Path<Uuid>, PathRejection>,
    ApiJson(body): ApiJson<CommentBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Path(id) = id?;
    let community = state.community.clone();
    let c = blocking(move || community.add_comment(id, &body.author_handle, &body.body)).await??;
    Ok((StatusCode::CREATED, Json(json!({ "comment_id": c.id, "comment": c }))))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestBody {
    #[serde(default)]
    document_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

pub async fn ingest(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    ApiJson(body): ApiJson<IngestBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    require_operator(&state, &headers)?;
    if body.text.len() > state.config.max_ingest_bytes {
        return Err(ApiError::new(
            "payload_too_large",
            format!("document text exceeds {} bytes", state.config.max_ingest_bytes),
        ));
    }
    if body.text.trim().is_empty() {
        return Err(ApiError::validation(ValidationReport::from_violations(vec![violation(
            "text",
            ViolationCode::Empty,
            "document text is empty",
        )])));
    }
    let document_id = body
        .document_id
        .filter(|d| !d.trim().is_empty())
        .unwrap_or_else(|| format!("doc-{}", query_hash(&body.text)));
    let job = IngestJob::queued(document_id.clone());
    let job_id = job.job_id;
    state.jobs.lock().insert(job_id, job);

    let doc = Document {
        id: document_id.clone(),
        title: body.title,
        text: body.text,
        submitted_at: Utc::now(),
    };
    let worker = state.clone();
    tokio::task::spawn_blocking(move || worker.run_ingest(job_id, doc));
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": job_id, "document_id": document_id, "status": JobStatus::Queued })),
    ))
}

pub async fn ingest_status(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    id: Result<Path<Uuid>, PathRejection>,
) -> ApiResult<Json<IngestJob>> {
    require_operator(&state, &headers)?;
    let Path(id) = id?;
    state
        .jobs
        .lock()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("ingest job {id}")))
}

pub async fn list_contributions(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Vec<Contribution>>> {
    require_operator(&state, &headers)?;
    let Query(q) = query?;
    let wanted = q.get("state").map(String::as_str).unwrap_or("pending");
    if !["pending", "approved", "rejected", "all"].contains(&wanted) {
        return Err(ApiError::bad_request(format!("unknown state {wanted:?}")));
    }
    let store = state.engine.store().read();
    let mut out: Vec<Contribution> = store
        .contributions()
        .filter(|c| {
            wanted == "all"
                || matches!(
                    (wanted, &c.decision),
                    ("pending", crate::store::Decision::Pending)
                        | ("approved", crate::store::Decision::Approved { .. })
                        | ("rejected", crate::store::Decision::Rejected { .. })
                )
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then_with(|| a.id.cmp(&b.id)));
    Ok(Json(out))
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Action {
    Approve,
    Reject,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    action: Action,
    moderator: String,
    #[serde(default)]
    reason: Option<String>,
}

pub async fn decide(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    id: Result<Path<Uuid>, PathRejection>,
    ApiJson(body): ApiJson<DecisionBody>,
) -> ApiResult<Json<Contribution>> {
    require_operator(&state, &headers)?;
    let Path(id) = id?;
    let action = match body.action {
        Action::Approve => Moderation::Approve,
        Action::Reject => Moderation::Reject {
            reason: body.reason.unwrap_or_default(),
        },
    };
    let community = state.community.clone();
    let c = blocking(move || community.moderate(id, action, &body.moderator)).await??;
    Ok(Json(c))
}

pub async fn feedback(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Response> {
    require_operator(&state, &headers)?;
    Ok(Json(state.community.feedback_report()).into_response())
}

pub async fn get_ranges(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<SpecRangeConfig>> {
    require_operator(&state, &headers)?;
    Ok(Json(state.engine.store().ranges()))
}

pub async fn put_ranges(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    ApiJson(ranges): ApiJson<SpecRangeConfig>,
) -> ApiResult<Json<SpecRangeConfig>> {
    require_operator(&state, &headers)?;
    if let Err(errors) = ranges.check() {
        let report = ValidationReport::from_violations(
            errors
                .into_iter()
                .map(|e| violation(e.field, ViolationCode::Invalid, e.reason))
                .collect(),
        );
        return Err(ApiError::validation(report));
    }
    let worker = state.clone();
    let applied = ranges.clone();
    blocking(move || worker.apply_ranges(applied)).await??;
    Ok(Json(ranges))
}

pub async fn not_found() -> ApiError {
    ApiError::new("not_found", "no such endpoint")
}
