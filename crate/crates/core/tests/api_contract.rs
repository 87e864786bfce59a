mod common;

use common::contract::{run_contract, ENDPOINTS};
use common::*;
use serde_json::json;

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn every_endpoint_and_error_code_is_reachable() {
    let summary = run_contract().await;
    assert_eq!(summary.missing_codes(), Vec::<&str>::new());
    for e in ENDPOINTS {
        assert!(summary.endpoints.contains(e), "endpoint {e} not exercised");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn request_id_is_echoed_or_generated() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let resp = s.get("/health").header("x-request-id", "abc-123").send().await.unwrap();
    assert_eq!(resp.headers()["x-request-id"], "abc-123");
    let resp = s.get("/nope").send().await.unwrap();
    let id = resp.headers()["x-request-id"].to_str().unwrap().to_string();
    let body: serde_json::Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "not_found");
    assert_eq!(body["request_id"], id);
}

#[tokio::test(flavor = "multi_thread")]
async fn cors_preflight_and_origin_allow_list() {
    let mut config = service_config();
    config.cors_allowed_origins = vec!["http://ui.example".into()];
    let s = TestServer::start(seeded_state(config)).await;
    let resp = s
        .client
        .request(reqwest::Method::OPTIONS, s.url("/specify"))
        .header("origin", "http://ui.example")
        .header("access-control-request-method", "POST")
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://ui.example");
    let resp = s.get("/health").header("origin", "http://evil.example").send().await.unwrap();
    assert!(!resp.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test(flavor = "multi_thread")]
async fn oversized_body_is_rejected_before_parsing() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let huge = "y".repeat(200 * 1024);
    let (status, body) = send(s.admin_post("/admin/ingest").json(&json!({"text": huge}))).await;
    assert_eq!(status, 413, "{body}");
    assert_eq!(body["code"], "payload_too_large");
}

#[tokio::test(flavor = "multi_thread")]
async fn rejection_requires_a_reason_and_hides_content() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let (_, receipt) = send(s.post("/use-cases").json(&contribution_body("bo", "Kelp farm monitor"))).await;
    let id = receipt["contribution_id"].as_str().unwrap();
    let path = format!("/admin/contributions/{id}/decision");
    let (status, body) = send(s.admin_post(&path).json(&json!({"action": "reject", "moderator": "op"}))).await;
    assert_eq!(status, 400, "{body}");
    let (status, body) = send(
        s.admin_post(&path)
            .json(&json!({"action": "reject", "moderator": "op", "reason": "not a networked use case"})),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["decision"]["state"], "rejected");
    let (_, rejected) = send(s.admin_get("/admin/contributions?state=rejected")).await;
    assert_eq!(rejected.as_array().unwrap().len(), 1);
    let (_, pending) = send(s.admin_get("/admin/contributions")).await;
    assert!(pending.as_array().unwrap().is_empty());
    let uc = receipt["use_case_id"].as_str().unwrap();
    let (status, _) = send(s.get(&format!("/use-cases/{uc}"))).await;
    assert_eq!(status, 404);
    let (status, detail) = send(s.admin_get(&format!("/use-cases/{uc}"))).await;
    assert_eq!(status, 200);
    assert_eq!(detail["use_case"]["status"], "rejected");
}

#[tokio::test(flavor = "multi_thread")]
async fn duplicate_submission_is_flagged() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let seed = &seed()[0];
    let body = json!({
        "contributor_handle": "dup",
        "name": seed.name,
        "description": seed.description,
        "processes": serde_json::to_value(&seed.processes).unwrap(),
    });
    let (status, receipt) = send(s.post("/use-cases").json(&body)).await;
    assert_eq!(status, 202, "{receipt}");
    assert_eq!(receipt["screening"]["duplicate_flag"], true);
    assert_eq!(receipt["screening"]["nearest_use_case_id"], seed.id.to_string());
}

#[tokio::test(flavor = "multi_thread")]
async fn specify_rejects_bad_n_and_unknown_provider() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let (status, body) = send(s.post("/specify").json(&json!({"description": "a farm", "n": 0}))).await;
    assert_eq!(status, 400);
    assert_eq!(body["details"]["violations"][0]["path"], "n");
    let (status, body) = send(s.post("/specify").json(&json!({"description": "a farm", "provider_id": "nope"}))).await;
    assert_eq!(status, 400, "{body}");
    assert_eq!(body["code"], "bad_request");
    let (status, body) = send(s.post("/specify").json(&json!({"description": "a farm", "extra": 1}))).await;
    assert_eq!(status, 400, "{body}");
    assert_eq!(body["code"], "validation_failed");
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_ranges_are_a_validation_error() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let (_, mut ranges) = send(s.admin_get("/admin/ranges")).await;
    ranges["latency_ms"]["min"] = json!(50.0);
    ranges["latency_ms"]["max"] = json!(1.0);
    let (status, body) = send(s.put("/admin/ranges").header("x-operator-key", OPERATOR_KEY).json(&ranges)).await;
    assert_eq!(status, 400, "{body}");
    assert_eq!(body["code"], "validation_failed");
}

#[tokio::test(flavor = "multi_thread")]
async fn admin_routes_are_closed_without_configured_key() {
    let mut config = service_config();
    config.operator_key = None;
    let s = TestServer::start(seeded_state(config)).await;
    let (status, _) = send(s.admin_get("/admin/feedback")).await;
    assert_eq!(status, 401);
}

#[tokio::test(flavor = "multi_thread")]
async fn specify_is_logged_for_feedback() {
    let s = TestServer::start(seeded_state(service_config())).await;
    let (status, spec) = send(s.post("/specify").json(&json!({"description": "robotic surgery over a 6G link", "n": 2}))).await;
    assert_eq!(status, 200);
    let top = spec["similar_use_cases"][0]["use_case_id"].clone();
    let (_, report) = send(s.admin_get("/admin/feedback")).await;
    let entry = report["entries"].as_array().unwrap().iter().find(|e| e["use_case_id"] == top).unwrap();
    assert_eq!(entry["times_retrieved"], 1);
    assert_eq!(entry["mean_rank"], 1.0);
}
