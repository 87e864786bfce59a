//! Saves a store to a snapshot file and loads it back.

use std::path::Path;
use std::sync::Arc;

use netspec::ontology::{parse_use_cases, UseCaseStatus};
use netspec::providers::DeterministicEmbedder;
use netspec::store::{load_snapshot, RetrievalQuery, Store};

fn main() {
    let seed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/seed_use_cases.json");
    let use_cases = parse_use_cases(&std::fs::read_to_string(seed).unwrap()).unwrap();
    let embedder = Arc::new(DeterministicEmbedder::default());
    let store = Store::in_memory(embedder.clone());
    store
        .upsert_many(use_cases.into_iter().map(|u| u.with_status(UseCaseStatus::Published)).collect())
        .unwrap();

    let dir = std::env::temp_dir().join(format!("netspec-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("snapshot.json");
    store.save_snapshot(&file).unwrap();
    println!("wrote {} bytes to {}", std::fs::metadata(&file).unwrap().len(), file.display());

    let restored = Store::from_snapshot(load_snapshot(&file).unwrap(), embedder).unwrap();
    let query = RetrievalQuery::new("factory robots and a digital twin").top(3);
    let same = store.search_text(&query).unwrap() == restored.search_text(&query).unwrap();
    println!("identical retrieval after reload: {same}");
    std::fs::remove_dir_all(&dir).unwrap();
}
