//! End-to-end walk through the HTTP API. Every step asserts its own
//! expectations; the returned summary lists which routes and error codes
//! were reached.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use netspec::service::{ServiceConfig, ERROR_CODES};
use netspec::store::Store;
use serde_json::{json, Value};

use super::*;

#[derive(Debug, Default)]
pub struct ContractSummary {
    pub endpoints: BTreeSet<&'static str>,
    pub codes: BTreeSet<String>,
    pub outage_latency: Duration,
}

impl ContractSummary {
    pub fn missing_codes(&self) -> Vec<&'static str> {
        ERROR_CODES
            .iter()
            .map(|(c, _)| *c)
            .filter(|c| !self.codes.contains(*c))
            .collect()
    }
}

pub const ENDPOINTS: [&str; 14] = [
    "GET /health",
    "POST /specify",
    "GET /use-cases",
    "POST /use-cases",
    "GET /use-cases/{id}",
    "POST /use-cases/{id}/votes",
    "POST /use-cases/{id}/comments",
    "POST /admin/ingest",
    "GET /admin/ingest/{job_id}",
    "GET /admin/contributions",
    "POST /admin/contributions/{id}/decision",
    "GET /admin/feedback",
    "GET /admin/ranges",
    "PUT /admin/ranges",
];

/// Asserts an error response and records its code.
fn expect_error(summary: &mut ContractSummary, got: (u16, Value), status: u16, code: &str) -> Value {
    let (s, body) = got;
    assert_eq!(s, status, "expected {code}, got {body}");
    assert_eq!(body["code"], code, "{body}");
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()), "{body}");
    assert!(body["request_id"].as_str().is_some_and(|r| !r.is_empty()), "{body}");
    summary.codes.insert(code.to_string());
    body
}

pub async fn run_contract() -> ContractSummary {
    let mut sum = ContractSummary::default();
    let server = TestServer::start(seeded_state(service_config())).await;
    let s = &server;

    // health
    let (status, health) = send(s.get("/health")).await;
    assert_eq!(status, 200);
    assert_eq!(health["published"], 7);
    sum.endpoints.insert("GET /health");

    // specify: success
    let (status, spec) = send(s.post("/specify").json(&json!({
        "name": "Remote mining truck",
        "description": "A driverless mining truck streams video to a remote operator who can take over control.",
        "n": 3
    })))
    .await;
    assert_eq!(status, 200, "{spec}");
    let processes = spec["processes"].as_array().unwrap();
    assert!(!processes.is_empty());
    assert_eq!(spec["radar"].as_array().unwrap().len(), processes.len());
    for radar in spec["radar"].as_array().unwrap() {
        assert_eq!(radar["axes"].as_array().unwrap().len(), 8);
    }
    let similar = spec["similar_use_cases"].as_array().unwrap();
    assert_eq!(similar.len(), 3);
    assert!(similar.iter().all(|h| h["name"].is_string() && h["similarity"].is_f64()));
    assert_eq!(spec["validation"]["valid"], true);
    assert_eq!(spec["provider_id"], "scripted");
    assert_eq!(spec["audit"]["contexts_used"], 3);
    sum.endpoints.insert("POST /specify");

    // specify: errors
    expect_error(&mut sum, send(s.post("/specify").json(&json!({"description": "  "}))).await, 400, "validation_failed");
    expect_error(
        &mut sum,
        send(s.post("/specify").header("content-type", "application/json").body("{\"description\": ")).await,
        400,
        "bad_request",
    );
    expect_error(
        &mut sum,
        send(s.post("/specify").json(&json!({"description": "x", "provider_id": "garbage"}))).await,
        422,
        "generation_unparseable",
    );
    let started = Instant::now();
    expect_error(
        &mut sum,
        send(s.post("/specify").json(&json!({"description": "x", "provider_id": "offline"}))).await,
        502,
        "provider_unavailable",
    );
    sum.outage_latency = started.elapsed();
    assert!(sum.outage_latency < s.state.config.specify_deadline());
    let started = Instant::now();
    expect_error(
        &mut sum,
        send(s.post("/specify").json(&json!({"description": "x", "provider_id": "slow"}))).await,
        504,
        "deadline_exceeded",
    );
    assert!(started.elapsed() < Duration::from_millis(2_900));

    // published listing and detail
    let (status, page) = send(s.get("/use-cases?page=1&page_size=5")).await;
    assert_eq!(status, 200);
    assert_eq!(page["total"], 7);
    assert_eq!(page["items"].as_array().unwrap().len(), 5);
    sum.endpoints.insert("GET /use-cases");
    expect_error(&mut sum, send(s.get("/use-cases?page=0")).await, 400, "bad_request");
    expect_error(&mut sum, send(s.get("/use-cases?status=pending")).await, 403, "forbidden");
    expect_error(
        &mut sum,
        send(s.get("/use-cases?status=pending").header("x-operator-key", "wrong")).await,
        401,
        "unauthorized",
    );

    let seed_id = "00000000-0000-4000-8000-000000000003";
    let (status, detail) = send(s.get(&format!("/use-cases/{seed_id}"))).await;
    assert_eq!(status, 200);
    assert_eq!(detail["use_case"]["processes"].as_array().unwrap().len(), 3);
    assert_eq!(detail["radar"].as_array().unwrap().len(), 3);
    sum.endpoints.insert("GET /use-cases/{id}");
    expect_error(
        &mut sum,
        send(s.get("/use-cases/00000000-0000-4000-8000-0000000000ff")).await,
        404,
        "not_found",
    );
    expect_error(&mut sum, send(s.client.delete(s.url("/use-cases"))).await, 405, "method_not_allowed");

    // votes and comments on a published use case
    let (status, v) = send(s.post(&format!("/use-cases/{seed_id}/votes")).json(&json!({"voter_handle": "ana", "value": "up"}))).await;
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["tally"], json!({"up": 1, "down": 0}));
    let (_, v) = send(s.post(&format!("/use-cases/{seed_id}/votes")).json(&json!({"voter_handle": "ana", "value": "down"}))).await;
    assert_eq!(v["tally"], json!({"up": 0, "down": 1}));
    sum.endpoints.insert("POST /use-cases/{id}/votes");
    let (status, c) = send(
        s.post(&format!("/use-cases/{seed_id}/comments"))
            .json(&json!({"author_handle": "ana", "body": "Monitoring latency looks generous."})),
    )
    .await;
    assert_eq!(status, 201, "{c}");
    assert!(c["comment_id"].is_string());
    sum.endpoints.insert("POST /use-cases/{id}/comments");

    // contribution, then moderation
    let (status, receipt) = send(s.post("/use-cases").json(&contribution_body("bo", "Subsea robot fleet"))).await;
    assert_eq!(status, 202, "{receipt}");
    assert_eq!(receipt["decision"], "pending");
    assert_eq!(receipt["screening"]["duplicate_flag"], false);
    sum.endpoints.insert("POST /use-cases");
    let pending_uc = receipt["use_case_id"].as_str().unwrap().to_string();
    let contribution_id = receipt["contribution_id"].as_str().unwrap().to_string();

    let mut bad = contribution_body("bo", "Broken");
    bad["processes"][0]["direction"] = json!("sideways");
    let body = expect_error(&mut sum, send(s.post("/use-cases").json(&bad)).await, 400, "validation_failed");
    let paths: Vec<&str> = body["details"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["path"].as_str().unwrap())
        .collect();
    assert_eq!(paths, ["processes[0].direction"]);

    // pending content is hidden from the public
    expect_error(&mut sum, send(s.get(&format!("/use-cases/{pending_uc}"))).await, 404, "not_found");
    expect_error(
        &mut sum,
        send(s.post(&format!("/use-cases/{pending_uc}/votes")).json(&json!({"voter_handle": "ana", "value": "up"}))).await,
        409,
        "not_published",
    );

    let (status, queue) = send(s.admin_get("/admin/contributions")).await;
    assert_eq!(status, 200);
    assert_eq!(queue.as_array().unwrap().len(), 1);
    sum.endpoints.insert("GET /admin/contributions");
    expect_error(&mut sum, send(s.get("/admin/contributions")).await, 401, "unauthorized");

    let decision = format!("/admin/contributions/{contribution_id}/decision");
    let (status, decided) = send(s.admin_post(&decision).json(&json!({"action": "approve", "moderator": "op"}))).await;
    assert_eq!(status, 200, "{decided}");
    assert_eq!(decided["decision"]["state"], "approved");
    sum.endpoints.insert("POST /admin/contributions/{id}/decision");
    expect_error(
        &mut sum,
        send(s.admin_post(&decision).json(&json!({"action": "reject", "moderator": "op", "reason": "late"}))).await,
        409,
        "not_pending",
    );
    let (status, _) = send(s.get(&format!("/use-cases/{pending_uc}"))).await;
    assert_eq!(status, 200);

    // document ingestion
    let text = std::fs::read_to_string(fixtures().join("smart_port.txt")).unwrap();
    let (status, job) = send(s.admin_post("/admin/ingest").json(&json!({"document_id": "smart-port", "text": text}))).await;
    assert_eq!(status, 202, "{job}");
    sum.endpoints.insert("POST /admin/ingest");
    let job = wait_for_job(s, job["job_id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "completed", "{job}");
    assert_eq!(job["contribution_ids"].as_array().unwrap().len(), 2);
    sum.endpoints.insert("GET /admin/ingest/{job_id}");
    expect_error(
        &mut sum,
        send(s.admin_post("/admin/ingest").json(&json!({"text": "x".repeat(20 * 1024)}))).await,
        413,
        "payload_too_large",
    );

    // feedback
    let (status, report) = send(s.admin_get("/admin/feedback")).await;
    assert_eq!(status, 200);
    let entry = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["use_case_id"] == seed_id)
        .unwrap();
    assert_eq!(entry["tally"], json!({"up": 0, "down": 1}));
    assert_eq!(entry["comment_count"], 1);
    sum.endpoints.insert("GET /admin/feedback");

    // ranges
    let (status, mut ranges) = send(s.admin_get("/admin/ranges")).await;
    assert_eq!(status, 200);
    assert_eq!(ranges["peak_data_rate_gbps"]["max"], 200.0);
    sum.endpoints.insert("GET /admin/ranges");
    ranges["latency_ms"]["max"] = json!(100.0);
    let body = expect_error(&mut sum, send(s.put("/admin/ranges").header("x-operator-key", OPERATOR_KEY).json(&ranges)).await, 409, "range_conflict");
    assert!(!body["details"]["offenders"].as_array().unwrap().is_empty());
    ranges["latency_ms"]["max"] = json!(2e4);
    let (status, _) = send(s.put("/admin/ranges").header("x-operator-key", OPERATOR_KEY).json(&ranges)).await;
    assert_eq!(status, 200);
    sum.endpoints.insert("PUT /admin/ranges");

    // rate limiting on /specify
    let mut limited = service_config();
    limited.specify_rate_limit_per_minute = 1;
    let rl = TestServer::start(seeded_state(limited)).await;
    let (status, _) = send(rl.post("/specify").json(&json!({"description": "a delivery drone"}))).await;
    assert_eq!(status, 200);
    let resp = rl.post("/specify").json(&json!({"description": "a delivery drone"})).send().await.unwrap();
    assert!(resp.headers().contains_key("retry-after"));
    let got = (resp.status().as_u16(), resp.json::<Value>().await.unwrap());
    expect_error(&mut sum, got, 429, "rate_limited");

    // storage outage
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let store = Arc::new(Store::open(&data, embedder()).unwrap());
    publish_seed(&store);
    let broken = TestServer::start(app_state(store, ServiceConfig { ..service_config() })).await;
    std::fs::remove_dir_all(&data).unwrap();
    std::fs::write(&data, b"not a directory").unwrap();
    expect_error(
        &mut sum,
        send(broken.post("/use-cases").json(&contribution_body("cy", "Glacier sensing"))).await,
        503,
        "storage_unavailable",
    );

    sum
}
