//! Embeds a few texts with the hashing embedder and prints pairwise cosines.

use netspec::providers::{DeterministicEmbedder, Embedder};
use netspec::store::cosine_similarity;

fn main() {
    let embedder = DeterministicEmbedder::default();
    let texts = [
        "Drone swarm streams inspection video",
        "drone SWARM streams inspection video!",
        "Soil moisture sensors report every hour",
    ];
    let vectors: Vec<_> = texts.iter().map(|t| embedder.embed(t).unwrap()).collect();
    println!("dimension {}", embedder.dimension());
    for i in 0..texts.len() {
        for j in i + 1..texts.len() {
            let s = cosine_similarity(vectors[i].as_slice(), vectors[j].as_slice()).unwrap();
            println!("{i} vs {j}: {s:.4}");
        }
    }
}
