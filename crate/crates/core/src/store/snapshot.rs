use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::records::{Comment, Contribution, Document, RetrievalLogRow, Vote};
use super::StoreError;
use crate::ontology::UseCase;
use crate::providers::EmbeddingVector;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedEmbedding {
    pub hash: String,
    pub vector: EmbeddingVector,
}

/// Everything needed to rebuild a store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreSnapshot {
    pub schema_version: u32,
    pub use_cases: Vec<UseCase>,
    pub comments: Vec<Comment>,
    pub votes: Vec<Vote>,
    pub documents: Vec<Document>,
    #[serde(default)]
    pub contributions: Vec<Contribution>,
    #[serde(default)]
    pub embedding_cache: Vec<CachedEmbedding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrieval_log: Vec<RetrievalLogRow>,
}

impl Default for StoreSnapshot {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            use_cases: Vec::new(),
            comments: Vec::new(),
            votes: Vec::new(),
            documents: Vec::new(),
            contributions: Vec::new(),
            embedding_cache: Vec::new(),
            retrieval_log: Vec::new(),
        }
    }
}

impl StoreSnapshot {
    /// Every comment, vote, log row and contribution must point at a known
    /// use case.
    pub fn check_integrity(&self) -> Result<(), String> {
        let ids: BTreeSet<Uuid> = self.use_cases.iter().map(|u| u.id).collect();
        if ids.len() != self.use_cases.len() {
            return Err("duplicate use case id".into());
        }
        let dangling = |kind: &str, id: &Uuid| format!("{kind} references unknown use case {id}");
        for c in &self.comments {
            if !ids.contains(&c.entity_id) {
                return Err(dangling("comment", &c.entity_id));
            }
        }
        for v in &self.votes {
            if !ids.contains(&v.entity_id) {
                return Err(dangling("vote", &v.entity_id));
            }
        }
        for r in &self.retrieval_log {
            if !ids.contains(&r.use_case_id) {
                return Err(dangling("retrieval log row", &r.use_case_id));
            }
        }
        for c in &self.contributions {
            if !ids.contains(&c.submitted.id) {
                return Err(dangling("contribution", &c.submitted.id));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization is infallible")
    }

    /// Decodes and checks a snapshot; never returns a partially read store.
    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        #[derive(Deserialize)]
        struct VersionProbe {
            schema_version: u32,
        }
        let corrupt = |e: serde_json::Error| StoreError::CorruptSnapshot {
            offset: Some(byte_offset(text, e.line(), e.column())),
            message: e.to_string(),
        };
        // Syntax is checked before the version so that truncation is always
        // reported as corruption.
        serde_json::from_str::<serde::de::IgnoredAny>(text).map_err(corrupt)?;
        let probe: VersionProbe = serde_json::from_str(text).map_err(corrupt)?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchemaVersion(probe.schema_version));
        }
        let snapshot: StoreSnapshot = serde_json::from_str(text).map_err(corrupt)?;
        snapshot
            .check_integrity()
            .map_err(|message| StoreError::CorruptSnapshot {
                offset: None,
                message,
            })?;
        Ok(snapshot)
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

pub fn save_snapshot(path: &Path, snapshot: &StoreSnapshot) -> Result<(), StoreError> {
    write_atomic(path, snapshot.to_json().as_bytes()).map_err(StoreError::IoFailure)
}

pub fn load_snapshot(path: &Path) -> Result<StoreSnapshot, StoreError> {
    let bytes = std::fs::read(path).map_err(StoreError::IoFailure)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| StoreError::CorruptSnapshot {
        offset: Some(e.valid_up_to()),
        message: "snapshot is not valid UTF-8".into(),
    })?;
    StoreSnapshot::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_account_for_lines() {
        let text = "ab\ncd\nef";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 9), text.len());
    }

    #[test]
    fn unsupported_version() {
        let text = r#"{"schema_version": 999, "use_cases": "whatever"}"#;
        assert!(matches!(
            StoreSnapshot::from_json(text),
            Err(StoreError::UnsupportedSchemaVersion(999))
        ));
    }

    #[test]
    fn truncation_is_corruption() {
        let text = StoreSnapshot::default().to_json();
        for cut in 0..text.len() {
            match StoreSnapshot::from_json(&text[..cut]) {
                Err(StoreError::CorruptSnapshot { offset, .. }) => {
                    assert!(offset.unwrap() <= cut);
                }
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        assert!(StoreSnapshot::from_json(&text).is_ok());
    }

    #[test]
    fn dangling_references_are_rejected() {
        let mut s = StoreSnapshot::default();
        s.votes.push(Vote {
            entity_id: Uuid::nil(),
            voter_handle: "a".into(),
            value: super::super::records::VoteValue::Up,
            ts: chrono::Utc::now(),
        });
        assert!(matches!(
            StoreSnapshot::from_json(&s.to_json()),
            Err(StoreError::CorruptSnapshot { offset: None, .. })
        ));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
