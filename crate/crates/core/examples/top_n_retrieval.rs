//! Loads the seed use cases and retrieves the closest matches for a query.

use std::path::Path;
use std::sync::Arc;

use netspec::ontology::{parse_use_cases, UseCaseStatus};
use netspec::providers::DeterministicEmbedder;
use netspec::store::{RetrievalQuery, Store};

fn main() {
    let seed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/seed_use_cases.json");
    let use_cases = parse_use_cases(&std::fs::read_to_string(seed).unwrap()).unwrap();
    let store = Store::in_memory(Arc::new(DeterministicEmbedder::default()));
    store
        .upsert_many(use_cases.into_iter().map(|u| u.with_status(UseCaseStatus::Published)).collect())
        .unwrap();

    let query = RetrievalQuery::new("robot arm controlled remotely by a surgeon with haptic feedback").top(3);
    let result = store.retrieve(&query).unwrap();
    let state = store.read();
    for hit in &result.hits {
        let name = state.use_case(&hit.use_case_id).map(|u| u.name.as_str()).unwrap_or("?");
        println!("#{} {:.4} {name}", hit.rank, hit.similarity);
    }
}
