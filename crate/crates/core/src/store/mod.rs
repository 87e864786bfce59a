//! The knowledge database: use case records plus an in-memory vector index
//! over the published ones, comments, votes, documents, contributions and an
//! append-only retrieval log.
//!
//! Readers work on an immutable [`StoreState`] snapshot behind an `Arc`, so a
//! read never observes a half-applied write. Writers are serialized; each
//! write clones the state, applies the change, persists it (when the store is
//! backed by a directory) and only then publishes the new state. A failed
//! persist leaves the visible store unchanged.

mod index;
mod records;
mod similarity;
mod snapshot;

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

pub use index::{RetrievalHit, RetrievalResult, VectorIndex, VectorIndexEntry, TIE_EPSILON};
pub use records::{
    Comment, Contribution, Decision, Document, Plausibility, RetrievalLogRow, Screening, Tally,
    Vote, VoteValue, MAX_COMMENT_CHARS,
};
pub use similarity::{cosine_similarity, SimilarityError};
pub use snapshot::{load_snapshot, save_snapshot, CachedEmbedding, StoreSnapshot, SCHEMA_VERSION};
pub(crate) use snapshot::byte_offset as snapshot_byte_offset;

use crate::ontology::{
    embedded_text, validate_use_case, SpecRangeConfig, UseCase, UseCaseStatus, ValidationReport,
};
use crate::providers::{fnv1a64, Embedder, EmbeddingVector, ProviderError};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const RETRIEVAL_LOG_FILE: &str = "retrieval_log.jsonl";
pub const DEFAULT_TOP_N: usize = 5;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationReport),
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
    #[error("unsupported snapshot schema version {0}")]
    UnsupportedSchemaVersion(u32),
    #[error("corrupt snapshot{}: {message}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    CorruptSnapshot {
        offset: Option<usize>,
        message: String,
    },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("embedding failed: {0}")]
    Embedding(#[from] ProviderError),
    #[error("invalid retrieval query: {0}")]
    InvalidQuery(String),
}

/// Hex FNV-1a hash of the text a use case is matched on.
pub fn text_hash(name: &str, description: &str) -> String {
    format!("{:016x}", fnv1a64(embedded_text(name, description).as_bytes()))
}

pub fn query_hash(text: &str) -> String {
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub text: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_min_similarity")]
    pub min_similarity: f64,
}

fn default_n() -> usize {
    DEFAULT_TOP_N
}

fn default_min_similarity() -> f64 {
    -1.0
}

impl RetrievalQuery {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            n: DEFAULT_TOP_N,
            min_similarity: -1.0,
        }
    }

    pub fn top(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn min_similarity(mut self, floor: f64) -> Self {
        self.min_similarity = floor;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalStats {
    pub times_retrieved: u64,
    /// 0 when never retrieved.
    pub mean_rank: f64,
    pub last_retrieved_at: Option<DateTime<Utc>>,
}

/// Consistent point-in-time view of the store.
#[derive(Debug, Clone, Default)]
pub struct StoreState {
    pub(crate) use_cases: BTreeMap<Uuid, UseCase>,
    pub(crate) comments: Vec<Comment>,
    pub(crate) votes: BTreeMap<(Uuid, String), Vote>,
    pub(crate) documents: BTreeMap<String, Document>,
    pub(crate) contributions: BTreeMap<Uuid, Contribution>,
    pub(crate) index: VectorIndex,
    pub(crate) ranges: SpecRangeConfig,
    pub(crate) revision: u64,
}

impl StoreState {
    pub fn use_case(&self, id: &Uuid) -> Option<&UseCase> {
        self.use_cases.get(id)
    }

    pub fn use_cases(&self) -> impl Iterator<Item = &UseCase> {
        self.use_cases.values()
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn comments_for(&self, id: &Uuid) -> impl Iterator<Item = &Comment> {
        let id = *id;
        self.comments.iter().filter(move |c| c.entity_id == id)
    }

    pub fn votes(&self) -> impl Iterator<Item = &Vote> {
        self.votes.values()
    }

    pub fn tally(&self, id: &Uuid) -> Tally {
        self.votes
            .values()
            .filter(|v| v.entity_id == *id)
            .fold(Tally::default(), |mut t, v| {
                match v.value {
                    VoteValue::Up => t.up += 1,
                    VoteValue::Down => t.down += 1,
                }
                t
            })
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn contribution(&self, id: &Uuid) -> Option<&Contribution> {
        self.contributions.get(id)
    }

    pub fn contributions(&self) -> impl Iterator<Item = &Contribution> {
        self.contributions.values()
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn ranges(&self) -> &SpecRangeConfig {
        &self.ranges
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Adds, refreshes or removes the index entry for `uc` depending on its
    /// status. `vector` must be the embedding of `uc`'s current text when
    /// the use case is published.
    pub(crate) fn reindex(&mut self, uc: &UseCase, vector: Option<EmbeddingVector>) {
        if uc.is_published() {
            let vector = vector.expect("published use case needs a vector");
            self.index.insert(VectorIndexEntry {
                use_case_id: uc.id,
                vector,
                embedded_text_hash: text_hash(&uc.name, &uc.description),
            });
        } else {
            self.index.remove(&uc.id);
        }
    }

    /// Stored vector for `uc` if its text is unchanged.
    pub(crate) fn cached_vector(&self, uc: &UseCase) -> Option<EmbeddingVector> {
        let hash = text_hash(&uc.name, &uc.description);
        self.index
            .get(&uc.id)
            .filter(|e| e.embedded_text_hash == hash)
            .map(|e| e.vector.clone())
    }

    fn to_snapshot(&self, retrieval_log: Vec<RetrievalLogRow>) -> StoreSnapshot {
        let mut cache: BTreeMap<String, EmbeddingVector> = BTreeMap::new();
        for e in self.index.entries() {
            cache
                .entry(e.embedded_text_hash.clone())
                .or_insert_with(|| e.vector.clone());
        }
        StoreSnapshot {
            schema_version: SCHEMA_VERSION,
            use_cases: self.use_cases.values().cloned().collect(),
            comments: self.comments.clone(),
            votes: self.votes.values().cloned().collect(),
            documents: self.documents.values().cloned().collect(),
            contributions: self.contributions.values().cloned().collect(),
            embedding_cache: cache
                .into_iter()
                .map(|(hash, vector)| CachedEmbedding { hash, vector })
                .collect(),
            retrieval_log,
        }
    }
}

#[derive(Debug, Default)]
struct RetrievalLog {
    rows: Vec<RetrievalLogRow>,
    flushed: usize,
}

pub struct Store {
    embedder: Arc<dyn Embedder>,
    state: RwLock<Arc<StoreState>>,
    writer: Mutex<()>,
    log: Mutex<RetrievalLog>,
    flush_lock: Mutex<()>,
    data_dir: Option<PathBuf>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("embedder", &self.embedder.id())
            .field("data_dir", &self.data_dir)
            .field("revision", &self.read().revision)
            .finish()
    }
}

impl Store {
    pub fn in_memory(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            embedder,
            state: RwLock::new(Arc::new(StoreState::default())),
            writer: Mutex::new(()),
            log: Mutex::new(RetrievalLog::default()),
            flush_lock: Mutex::new(()),
            data_dir: None,
        }
    }

    /// Opens (or creates) a directory-backed store.
    pub fn open(data_dir: &Path, embedder: Arc<dyn Embedder>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(data_dir)?;
        let snapshot_path = data_dir.join(SNAPSHOT_FILE);
        let snapshot = if snapshot_path.exists() {
            load_snapshot(&snapshot_path)?
        } else {
            StoreSnapshot::default()
        };
        let mut store = Self::from_snapshot(snapshot, embedder)?;
        let log_rows = read_log(&data_dir.join(RETRIEVAL_LOG_FILE))?;
        {
            let state = store.read();
            if let Some(row) = log_rows.iter().find(|r| state.use_case(&r.use_case_id).is_none()) {
                return Err(StoreError::CorruptSnapshot {
                    offset: None,
                    message: format!("retrieval log references unknown use case {}", row.use_case_id),
                });
            }
        }
        let log = store.log.get_mut();
        log.rows.extend(log_rows);
        log.flushed = log.rows.len();
        store.data_dir = Some(data_dir.to_path_buf());
        Ok(store)
    }

    /// Rebuilds an in-memory store, re-embedding any published use case whose
    /// cached vector is missing or has the wrong dimension.
    pub fn from_snapshot(snapshot: StoreSnapshot, embedder: Arc<dyn Embedder>) -> Result<Self, StoreError> {
        snapshot
            .check_integrity()
            .map_err(|message| StoreError::CorruptSnapshot {
                offset: None,
                message,
            })?;
        let cache: HashMap<String, EmbeddingVector> = snapshot
            .embedding_cache
            .into_iter()
            .filter(|c| c.vector.len() == embedder.dimension())
            .map(|c| (c.hash, c.vector))
            .collect();
        let mut state = StoreState::default();
        for uc in snapshot.use_cases {
            if uc.is_published() {
                let hash = text_hash(&uc.name, &uc.description);
                let vector = match cache.get(&hash) {
                    Some(v) => v.clone(),
                    None => embedder.embed(&uc.embedded_text())?,
                };
                state.reindex(&uc, Some(vector));
            }
            state.use_cases.insert(uc.id, uc);
        }
        state.comments = snapshot.comments;
        state.votes = snapshot
            .votes
            .into_iter()
            .map(|v| ((v.entity_id, v.voter_handle.clone()), v))
            .collect();
        state.documents = snapshot
            .documents
            .into_iter()
            .map(|d| (d.id.clone(), d))
            .collect();
        state.contributions = snapshot
            .contributions
            .into_iter()
            .map(|c| (c.id, c))
            .collect();
        let store = Self::in_memory(embedder);
        *store.state.write() = Arc::new(state);
        {
            let mut log = store.log.lock();
            log.rows = snapshot.retrieval_log;
        }
        Ok(store)
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    /// Current consistent snapshot of the state.
    pub fn read(&self) -> Arc<StoreState> {
        self.state.read().clone()
    }

    /// Applies `f` to a private copy of the state and publishes it only if
    /// `f` succeeds and the result is persisted.
    pub(crate) fn write<R>(
        &self,
        f: impl FnOnce(&mut StoreState) -> Result<R, StoreError>,
    ) -> Result<R, StoreError> {
        let _writer = self.writer.lock();
        let mut next = (*self.read()).clone();
        let out = f(&mut next)?;
        next.revision += 1;
        self.persist_state(&next)?;
        *self.state.write() = Arc::new(next);
        drop(_writer);
        if let Err(e) = self.flush() {
            tracing::warn!("retrieval log flush failed: {e}");
        }
        Ok(out)
    }

    fn persist_state(&self, state: &StoreState) -> Result<(), StoreError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let json = state.to_snapshot(Vec::new()).to_json();
        snapshot::write_atomic(&dir.join(SNAPSHOT_FILE), json.as_bytes())
            .map_err(|e| StoreError::StorageUnavailable(e.to_string()))
    }

    pub fn ranges(&self) -> SpecRangeConfig {
        self.read().ranges.clone()
    }

    /// Installs new ranges. Fails with the offending use case ids when a
    /// published use case would no longer validate.
    pub fn set_ranges(&self, ranges: SpecRangeConfig) -> Result<Result<(), Vec<Uuid>>, StoreError> {
        self.write(|s| {
            let offenders: Vec<Uuid> = s
                .use_cases
                .values()
                .filter(|u| u.is_published() && !validate_use_case(u, &ranges).valid)
                .map(|u| u.id)
                .collect();
            if offenders.is_empty() {
                s.ranges = ranges;
                Ok(Ok(()))
            } else {
                Ok(Err(offenders))
            }
        })
    }

    pub fn get_use_case(&self, id: &Uuid) -> Option<UseCase> {
        self.read().use_case(id).cloned()
    }

    fn vector_for(&self, state: &StoreState, uc: &UseCase) -> Result<Option<EmbeddingVector>, StoreError> {
        if !uc.is_published() {
            return Ok(None);
        }
        match state.cached_vector(uc) {
            Some(v) => Ok(Some(v)),
            None => Ok(Some(self.embedder.embed(&uc.embedded_text())?)),
        }
    }

    /// Inserts or replaces a use case. Returns the new store revision.
    pub fn upsert_use_case(&self, uc: UseCase) -> Result<u64, StoreError> {
        self.upsert_many(vec![uc])
    }

    /// Inserts or replaces several use cases in one write. Nothing is stored
    /// unless every one validates.
    pub fn upsert_many(&self, use_cases: Vec<UseCase>) -> Result<u64, StoreError> {
        let current = self.read();
        for uc in &use_cases {
            let report = validate_use_case(uc, &current.ranges);
            if !report.valid {
                return Err(StoreError::ValidationFailed(report));
            }
        }
        let vectors = use_cases
            .iter()
            .map(|uc| self.vector_for(&current, uc))
            .collect::<Result<Vec<_>, _>>()?;
        let now = Utc::now();
        self.write(move |s| {
            for (mut uc, vector) in use_cases.into_iter().zip(vectors) {
                if let Some(existing) = s.use_cases.get(&uc.id) {
                    uc.created_at = existing.created_at;
                }
                uc.updated_at = now;
                s.reindex(&uc, vector);
                s.use_cases.insert(uc.id, uc);
            }
            Ok(s.revision + 1)
        })
    }

    /// Records a source document, replacing any earlier one with the same id.
    pub fn put_document(&self, doc: Document) -> Result<u64, StoreError> {
        self.write(move |s| {
            s.documents.insert(doc.id.clone(), doc);
            Ok(s.revision + 1)
        })
    }

    /// Top-n published use cases by cosine similarity to the query text.
    /// Appends one log row per hit.
    pub fn retrieve(&self, query: &RetrievalQuery) -> Result<RetrievalResult, StoreError> {
        let result = self.search_text(query)?;
        let ts = Utc::now();
        let qh = query_hash(&query.text);
        let mut log = self.log.lock();
        log.rows.extend(result.hits.iter().map(|h| RetrievalLogRow {
            ts,
            query_hash: qh.clone(),
            use_case_id: h.use_case_id,
            rank: h.rank,
            similarity: h.similarity,
        }));
        Ok(result)
    }

    /// Same as [`Store::retrieve`] without touching the retrieval log.
    pub fn search_text(&self, query: &RetrievalQuery) -> Result<RetrievalResult, StoreError> {
        if query.n == 0 {
            return Err(StoreError::InvalidQuery("n must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&query.min_similarity) {
            return Err(StoreError::InvalidQuery("min_similarity must lie in [-1, 1]".into()));
        }
        let vector = self.embedder.embed(&query.text)?;
        Ok(self.search_vector(&vector, query.n, query.min_similarity))
    }

    pub fn search_vector(&self, vector: &EmbeddingVector, n: usize, min_similarity: f64) -> RetrievalResult {
        self.read().index.search(vector.as_slice(), n, min_similarity)
    }

    pub fn retrieval_log(&self) -> Vec<RetrievalLogRow> {
        self.log.lock().rows.clone()
    }

    /// Per use case retrieval counters folded from the log.
    pub fn retrieval_stats(&self) -> BTreeMap<Uuid, RetrievalStats> {
        let state = self.read();
        let mut stats: BTreeMap<Uuid, (u64, u64, Option<DateTime<Utc>>)> =
            state.use_cases.keys().map(|id| (*id, (0, 0, None))).collect();
        for row in self.log.lock().rows.iter() {
            let e = stats.entry(row.use_case_id).or_default();
            e.0 += 1;
            e.1 += row.rank as u64;
            e.2 = e.2.max(Some(row.ts));
        }
        stats
            .into_iter()
            .map(|(id, (n, rank_sum, last))| {
                let mean_rank = if n == 0 { 0.0 } else { rank_sum as f64 / n as f64 };
                (
                    id,
                    RetrievalStats {
                        times_retrieved: n,
                        mean_rank,
                        last_retrieved_at: last,
                    },
                )
            })
            .collect()
    }

    /// Appends buffered retrieval log rows to the on-disk log.
    pub fn flush(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let _flushing = self.flush_lock.lock();
        let (pending, end) = {
            let log = self.log.lock();
            (log.rows[log.flushed..].to_vec(), log.rows.len())
        };
        if pending.is_empty() {
            return Ok(());
        }
        let mut out = String::new();
        for row in &pending {
            out.push_str(&serde_json::to_string(row).expect("log rows serialize"));
            out.push('\n');
        }
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(RETRIEVAL_LOG_FILE))
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        self.log.lock().flushed = end;
        Ok(())
    }

    /// Full snapshot including the retrieval log.
    pub fn snapshot(&self) -> StoreSnapshot {
        let state = self.read();
        state.to_snapshot(self.retrieval_log())
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), StoreError> {
        save_snapshot(path, &self.snapshot())
    }

    /// Replaces this store's contents with `snapshot`, persisting it when the
    /// store is directory-backed.
    pub fn replace_with(&self, snapshot: StoreSnapshot) -> Result<(), StoreError> {
        let fresh = Store::from_snapshot(snapshot, self.embedder.clone())?;
        let new_state = fresh.read();
        let rows = fresh.retrieval_log();
        let _writer = self.writer.lock();
        let _flushing = self.flush_lock.lock();
        if let Some(dir) = &self.data_dir {
            self.persist_state(&new_state)?;
            let mut out = String::new();
            for row in &rows {
                out.push_str(&serde_json::to_string(row).expect("log rows serialize"));
                out.push('\n');
            }
            snapshot::write_atomic(&dir.join(RETRIEVAL_LOG_FILE), out.as_bytes())
                .map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        }
        let mut state = (*new_state).clone();
        state.ranges = self.read().ranges.clone();
        *self.state.write() = Arc::new(state);
        let mut log = self.log.lock();
        log.flushed = rows.len();
        log.rows = rows;
        Ok(())
    }

    /// Published use cases (optionally any status) sorted by `updated_at`
    /// descending, ties by id.
    pub fn list_use_cases(&self, status: Option<UseCaseStatus>) -> Vec<UseCase> {
        let state = self.read();
        let mut out: Vec<UseCase> = state
            .use_cases
            .values()
            .filter(|u| status.is_none_or(|s| u.status == s))
            .cloned()
            .collect();
        out.sort_by(|a, b| b.updated_at.cmp(&a.updated_at).then_with(|| a.id.cmp(&b.id)));
        out
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            tracing::warn!("failed to flush retrieval log on drop: {e}");
        }
    }
}

fn read_log(path: &Path) -> Result<Vec<RetrievalLogRow>, StoreError> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut rows = Vec::new();
    let mut offset = 0;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            let row = serde_json::from_str(&line).map_err(|e| StoreError::CorruptSnapshot {
                offset: Some(offset + e.column().saturating_sub(1)),
                message: format!("retrieval log: {e}"),
            })?;
            rows.push(row);
        }
        offset += line.len() + 1;
    }
    Ok(rows)
}
