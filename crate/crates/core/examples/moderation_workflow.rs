//! Submit, moderate, vote, comment, and read the feedback report.

use std::path::Path;
use std::sync::Arc;

use netspec::community::{Community, Moderation};
use netspec::ontology::{parse_use_cases, UseCaseStatus};
use netspec::providers::DeterministicEmbedder;
use netspec::store::{RetrievalQuery, Store, VoteValue};

fn main() {
    let seed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/seed_use_cases.json");
    let mut use_cases = parse_use_cases(&std::fs::read_to_string(seed).unwrap()).unwrap();
    let store = Arc::new(Store::in_memory(Arc::new(DeterministicEmbedder::default())));
    let community = Community::new(store.clone());

    let draft = use_cases.pop().unwrap();
    store
        .upsert_many(use_cases.into_iter().map(|u| u.with_status(UseCaseStatus::Published)).collect())
        .unwrap();

    let pending = community.submit_contribution(draft, "alice").unwrap();
    let query = RetrievalQuery::new("drone swarm inspection").top(3);
    let before = store.search_text(&query).unwrap();
    println!("pending contribution retrievable: {}", before.ids().contains(&pending.submitted.id));

    community.moderate(pending.id, Moderation::Approve, "operator").unwrap();
    let after = store.retrieve(&query).unwrap();
    println!("approved contribution retrievable: {}", after.ids().contains(&pending.submitted.id));

    community.cast_vote(pending.submitted.id, "bob", VoteValue::Up).unwrap();
    community.cast_vote(pending.submitted.id, "carol", VoteValue::Down).unwrap();
    community.cast_vote(pending.submitted.id, "carol", VoteValue::Up).unwrap();
    community.add_comment(pending.submitted.id, "bob", "Latency numbers look right.").unwrap();

    for e in community.feedback_report().entries.iter().filter(|e| e.times_retrieved > 0) {
        println!(
            "{:<45} +{} -{} comments {} retrieved {} mean rank {:.1}",
            e.name, e.tally.up, e.tally.down, e.comment_count, e.times_retrieved, e.mean_rank
        );
    }
}
