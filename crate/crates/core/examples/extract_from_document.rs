//! Extracts draft use cases from a plain-text document.

use std::path::Path;
use std::sync::Arc;

use netspec::providers::{DeterministicEmbedder, ScriptedGenerator};
use netspec::rag::RagEngine;
use netspec::store::Store;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let text = std::fs::read_to_string(fixtures.join("smart_port.txt")).unwrap();
    let store = Arc::new(Store::in_memory(Arc::new(DeterministicEmbedder::default())));
    let generator = ScriptedGenerator::from_script_file("scripted", &fixtures.join("script.json")).unwrap();
    let engine = RagEngine::new(store, Arc::new(generator));

    let outcome = engine
        .extract("smart-port", &text, |done, total| eprintln!("chunk {done}/{total}"))
        .unwrap();
    println!("{} chunks, {} failures", outcome.chunks, outcome.failures.len());
    for uc in &outcome.use_cases {
        println!("- {} [{:?}] with {} processes", uc.name, uc.status, uc.processes.len());
    }
}
