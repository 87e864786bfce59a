#![allow(dead_code)]
pub mod contract;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use netspec::community::Community;
use netspec::ontology::{parse_use_cases, UseCase, UseCaseStatus};
use netspec::providers::{
    DeterministicEmbedder, Generator, HttpSettings, RemoteGenerator, ScriptedGenerator,
};
use netspec::rag::RagEngine;
use netspec::service::{router, AppState, ServiceConfig};
use netspec::store::Store;
use tokio::sync::oneshot;

pub const OPERATOR_KEY: &str = "test-operator-key";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn seed() -> Vec<UseCase> {
    let text = std::fs::read_to_string(fixtures().join("seed_use_cases.json")).unwrap();
    parse_use_cases(&text).unwrap()
}

pub fn embedder() -> Arc<DeterministicEmbedder> {
    Arc::new(DeterministicEmbedder::default())
}

pub fn publish_seed(store: &Store) {
    let published = seed()
        .into_iter()
        .map(|uc| uc.with_status(UseCaseStatus::Published))
        .collect();
    store.upsert_many(published).unwrap();
}

pub fn scripted() -> Arc<dyn Generator> {
    Arc::new(ScriptedGenerator::from_script_file("scripted", &fixtures().join("script.json")).unwrap())
}

/// A generator pointing at a port nobody listens on.
pub fn offline() -> Arc<dyn Generator> {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut http = HttpSettings::new(format!("http://127.0.0.1:{port}/v1/chat"), "none");
    http.max_retries = 0;
    http.timeout_ms = 2_000;
    Arc::new(RemoteGenerator::new(http).with_id("offline"))
}

/// Builds the engine used by the API tests: the fixture script as default,
/// plus `slow`, `garbage` and `offline` generators selectable by id.
pub fn engine(store: Arc<Store>) -> RagEngine {
    let script = std::fs::read_to_string(fixtures().join("responses/specify.txt")).unwrap();
    RagEngine::new(store, scripted())
        .with_generator(Arc::new(
            ScriptedGenerator::new("slow")
                .rule("", script)
                .with_delay(Duration::from_millis(3_000)),
        ))
        .with_generator(Arc::new(ScriptedGenerator::new("garbage").rule("", "I cannot help with that.")))
        .with_generator(offline())
}

pub fn service_config() -> ServiceConfig {
    ServiceConfig {
        operator_key: Some(OPERATOR_KEY.into()),
        specify_deadline_ms: 1_500,
        specify_rate_limit_per_minute: 0,
        max_ingest_bytes: 16 * 1024,
        ..ServiceConfig::default()
    }
}

pub fn app_state(store: Arc<Store>, config: ServiceConfig) -> Arc<AppState> {
    let community = Community::new(store.clone());
    Arc::new(AppState::new(Arc::new(engine(store)), community, config))
}

pub fn seeded_state(config: ServiceConfig) -> Arc<AppState> {
    let store = Arc::new(Store::in_memory(embedder()));
    publish_seed(&store);
    app_state(store, config)
}

pub struct TestServer {
    pub base: String,
    pub state: Arc<AppState>,
    pub client: reqwest::Client,
    shutdown: Option<oneshot::Sender<()>>,
}

impl TestServer {
    pub async fn start(state: Arc<AppState>) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(state.clone()).into_make_service_with_connect_info::<SocketAddr>();
        tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        Self {
            base: format!("http://{addr}/api/v1"),
            state,
            client: reqwest::Client::new(),
            shutdown: Some(tx),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, path: &str) -> reqwest::RequestBuilder {
        self.client.get(self.url(path))
    }

    pub fn post(&self, path: &str) -> reqwest::RequestBuilder {
        self.client.post(self.url(path))
    }

    pub fn put(&self, path: &str) -> reqwest::RequestBuilder {
        self.client.put(self.url(path))
    }

    pub fn admin_get(&self, path: &str) -> reqwest::RequestBuilder {
        self.get(path).header("x-operator-key", OPERATOR_KEY)
    }

    pub fn admin_post(&self, path: &str) -> reqwest::RequestBuilder {
        self.post(path).header("x-operator-key", OPERATOR_KEY)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Status and JSON body of a response.
pub async fn send(req: reqwest::RequestBuilder) -> (u16, serde_json::Value) {
    let resp = req.send().await.unwrap();
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap();
    let body = serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text));
    (status, body)
}

pub fn contribution_body(handle: &str, name: &str) -> serde_json::Value {
    serde_json::json!({
        "contributor_handle": handle,
        "name": name,
        "description": format!("{name}: underwater robots relay sonar maps and receive mission updates through acoustic gateways."),
        "processes": [{
            "name": "Sonar map upload",
            "description": "Compressed sonar tiles sent to the surface buoy.",
            "is_real_time": false,
            "direction": "transmit",
            "message_type": "sensor",
            "specification": {"user_experienced_data_rate_mbps": 2, "latency_ms": 500, "reliability_percentage": 99}
        }]
    })
}

/// Polls an ingest job until it leaves the queued/running states.
pub async fn wait_for_job(server: &TestServer, job_id: &str) -> serde_json::Value {
    for _ in 0..200 {
        let (status, job) = send(server.admin_get(&format!("/admin/ingest/{job_id}"))).await;
        assert_eq!(status, 200, "{job}");
        if job["status"] == "completed" || job["status"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("ingest job {job_id} did not finish");
}
