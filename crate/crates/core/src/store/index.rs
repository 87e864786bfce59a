use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::similarity::cosine_similarity;
use crate::providers::EmbeddingVector;

/// Similarities closer than this are treated as equal when ranking.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndexEntry {
    pub use_case_id: Uuid,
    pub vector: EmbeddingVector,
    /// FNV-1a hash (hex) of the text the vector was computed from.
    pub embedded_text_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub use_case_id: Uuid,
    pub similarity: f64,
    /// 1-based.
    pub rank: usize,
}

/// Top-n matches, best first. Ties are broken by ascending use case id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<RetrievalHit>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<Uuid> {
        self.hits.iter().map(|h| h.use_case_id).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Exact full-scan cosine index, keyed by use case id.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    entries: BTreeMap<Uuid, VectorIndexEntry>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: VectorIndexEntry) -> Option<VectorIndexEntry> {
        self.entries.insert(entry.use_case_id, entry)
    }

    pub fn remove(&mut self, id: &Uuid) -> Option<VectorIndexEntry> {
        self.entries.remove(id)
    }

    pub fn get(&self, id: &Uuid) -> Option<&VectorIndexEntry> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &Uuid) -> bool {
        self.entries.contains_key(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &VectorIndexEntry> {
        self.entries.values()
    }

    /// Scores every entry against `query` and keeps the best `n` whose
    /// similarity is at least `min_similarity`. Entries whose vector cannot be
    /// compared (wrong dimension, zero) are skipped.
    pub fn search(&self, query: &[f64], n: usize, min_similarity: f64) -> RetrievalResult {
        let mut scored: Vec<(Uuid, f64)> = self
            .entries
            .values()
            .filter_map(|e| {
                cosine_similarity(query, e.vector.as_slice())
                    .ok()
                    .map(|s| (e.use_case_id, s))
            })
            .filter(|(_, s)| *s >= min_similarity)
            .collect();
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        // Mathematically equal cosines can differ in the last bits depending
        // on summation order. Scores within TIE_EPSILON of a group's leader
        // take the leader's value and are ordered by id.
        let mut start = 0;
        while start < scored.len() && start < n {
            let leader = scored[start].1;
            let mut end = start + 1;
            while end < scored.len() && leader - scored[end].1 <= TIE_EPSILON {
                scored[end].1 = leader;
                end += 1;
            }
            scored[start..end].sort_unstable_by_key(|(id, _)| *id);
            start = end;
        }
        scored.truncate(n);
        RetrievalResult {
            hits: scored
                .into_iter()
                .enumerate()
                .map(|(i, (use_case_id, similarity))| RetrievalHit {
                    use_case_id,
                    similarity,
                    rank: i + 1,
                })
                .collect(),
        }
    }
}
