//! Serves the HTTP API over the seed data with a scripted model.
//! Stop with Ctrl-C.
//!
//!     cargo run --example serve_api -- 127.0.0.1:8080
//!     curl -s localhost:8080/api/v1/use-cases

use std::path::Path;
use std::sync::Arc;

use netspec::community::Community;
use netspec::ontology::{parse_use_cases, UseCaseStatus};
use netspec::providers::{DeterministicEmbedder, ScriptedGenerator};
use netspec::rag::RagEngine;
use netspec::service::{serve, AppState, ServiceConfig};
use netspec::store::Store;

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let seed = parse_use_cases(&std::fs::read_to_string(fixtures.join("seed_use_cases.json"))?).unwrap();
    let store = Arc::new(Store::in_memory(Arc::new(DeterministicEmbedder::default())));
    store
        .upsert_many(seed.into_iter().map(|u| u.with_status(UseCaseStatus::Published)).collect())
        .unwrap();
    let generator = ScriptedGenerator::from_script_file("scripted", &fixtures.join("script.json")).unwrap();
    let engine = Arc::new(RagEngine::new(store.clone(), Arc::new(generator)));
    let config = ServiceConfig {
        operator_key: std::env::var("NETSPEC_OPERATOR_KEY").ok(),
        ..ServiceConfig::default()
    };
    let state = Arc::new(AppState::new(engine, Community::new(store), config));

    let listener = tokio::net::TcpListener::bind(&addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
