use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use netspec::providers::{
    Embedder, GenerationRequest, Generator, HttpSettings, ProviderError, RemoteEmbedder,
    RemoteGenerator,
};
use serde_json::{json, Value};

#[derive(Default)]
struct Mock {
    calls: AtomicUsize,
    fail_first: usize,
}

async fn chat(State(m): State<Arc<Mock>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = m.calls.fetch_add(1, Ordering::SeqCst);
    if n < m.fail_first {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "busy"})));
    }
    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let prompt = body["messages"][0]["content"].as_str().unwrap_or("");
    let content = format!("model={} temp={} auth={auth} echo={prompt}", body["model"], body["temperature"]);
    (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})))
}

async fn reject() -> (StatusCode, &'static str) {
    (StatusCode::BAD_REQUEST, "bad model")
}

async fn embeddings(Json(body): Json<Value>) -> Json<Value> {
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"index": i, "embedding": [t.as_str().unwrap().len() as f64, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]}))
        .collect();
    Json(json!({"data": data}))
}

fn spawn_mock(mock: Arc<Mock>) -> String {
    let app = Router::new()
        .route("/chat", post(chat))
        .route("/reject", post(reject))
        .route("/embed", post(embeddings))
        .with_state(mock);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn settings(url: String) -> HttpSettings {
    let mut s = HttpSettings::new(url, "test-model");
    s.initial_backoff_ms = 10;
    s.timeout_ms = 5_000;
    s
}

#[test]
fn generator_sends_chat_request_with_bearer_token() {
    let base = spawn_mock(Arc::new(Mock::default()));
    std::env::set_var("NETSPEC_TEST_TOKEN", "s3cret");
    let mut s = settings(format!("{base}/chat"));
    s.auth_token_env_var = Some("NETSPEC_TEST_TOKEN".into());
    let g = RemoteGenerator::new(s);
    assert_eq!(g.id(), "remote:test-model");
    let r = g.generate(&GenerationRequest::new("hello")).unwrap();
    assert_eq!(r.text, "model=\"test-model\" temp=0.0 auth=Bearer s3cret echo=hello");
}

#[test]
fn transient_failures_are_retried() {
    let mock = Arc::new(Mock {
        fail_first: 2,
        ..Mock::default()
    });
    let base = spawn_mock(mock.clone());
    let g = RemoteGenerator::new(settings(format!("{base}/chat")));
    let r = g.generate(&GenerationRequest::new("x")).unwrap();
    assert!(r.text.ends_with("echo=x"));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn exhausted_retries_report_unavailable() {
    let mock = Arc::new(Mock {
        fail_first: 10,
        ..Mock::default()
    });
    let base = spawn_mock(mock.clone());
    let g = RemoteGenerator::new(settings(format!("{base}/chat")));
    let err = g.generate(&GenerationRequest::new("x")).unwrap_err();
    assert!(matches!(err, ProviderError::RemoteUnavailable { .. }), "{err}");
    assert!(err.is_unavailable());
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let base = spawn_mock(Arc::new(Mock::default()));
    let g = RemoteGenerator::new(settings(format!("{base}/reject")));
    match g.generate(&GenerationRequest::new("x")) {
        Err(ProviderError::RemoteRejected { status, body }) => {
            assert_eq!(status, 400);
            assert_eq!(body, "bad model");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_fails_fast_without_retries() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut s = settings(format!("http://127.0.0.1:{port}/chat"));
    s.max_retries = 0;
    let start = std::time::Instant::now();
    let err = RemoteGenerator::new(s).generate(&GenerationRequest::new("x")).unwrap_err();
    assert!(err.is_unavailable());
    assert!(start.elapsed() < Duration::from_secs(2));
}

#[test]
fn embedder_reorders_by_index_and_normalizes() {
    let base = spawn_mock(Arc::new(Mock::default()));
    let e = RemoteEmbedder::new(settings(format!("{base}/embed")), 8);
    let v = e.embed_batch(&["abc", "a"]).unwrap();
    let norm = |x: f64| x / (x * x + 1.0).sqrt();
    assert!((v[0].as_slice()[0] - norm(3.0)).abs() < 1e-12);
    assert!((v[1].as_slice()[0] - norm(1.0)).abs() < 1e-12);
    let wrong = RemoteEmbedder::new(settings(format!("{base}/embed")), 16);
    assert!(matches!(
        wrong.embed("abc"),
        Err(ProviderError::DimensionMismatch { expected: 16, actual: 8 })
    ));
}
