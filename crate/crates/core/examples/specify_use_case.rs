//! Runs the retrieval-augmented specification step with a scripted model.
//! Swap the generator for `RemoteGenerator` to use a real endpoint.

use std::path::Path;
use std::sync::Arc;

use netspec::ontology::{parse_use_cases, Metric, UseCaseStatus};
use netspec::providers::{DeterministicEmbedder, ScriptedGenerator};
use netspec::rag::{process_radar, RagEngine, SpecifyRequest};
use netspec::store::Store;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let seed = parse_use_cases(&std::fs::read_to_string(fixtures.join("seed_use_cases.json")).unwrap()).unwrap();
    let store = Arc::new(Store::in_memory(Arc::new(DeterministicEmbedder::default())));
    store
        .upsert_many(seed.into_iter().map(|u| u.with_status(UseCaseStatus::Published)).collect())
        .unwrap();

    let generator = ScriptedGenerator::from_script_file("scripted", &fixtures.join("script.json")).unwrap();
    let engine = RagEngine::new(store.clone(), Arc::new(generator));
    let outcome = engine
        .generate_specification(&SpecifyRequest::new(
            "Port crane teleoperation",
            "An operator steers a container crane remotely using live camera video and joystick commands.",
        ))
        .unwrap();

    println!("similar use cases: {}", outcome.similar_use_cases.hits.len());
    println!("valid: {}, retries: {}", outcome.validation.valid, outcome.retry_count);
    let ranges = store.ranges();
    for p in &outcome.processes {
        let latency = p.specification.get(Metric::Latency).map_or("-".to_string(), |v| format!("{v} ms"));
        println!("{} ({:?}), latency {latency}", p.name, p.direction);
        let radar = process_radar(p, &ranges);
        for axis in &radar.axes.axes {
            println!("    {:<28} {:.3}", format!("{:?}", axis.metric), axis.value);
        }
    }
}
