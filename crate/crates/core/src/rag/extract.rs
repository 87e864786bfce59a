//! Turns unstructured documents into draft use cases.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use super::parser::{parse_json_array, process_from_value, reject_unknown, required_string, ParseFailure};
use super::prompt::{process_fields, render, TemplateRegistry};
use super::RagError;
use crate::ontology::{
    validate_use_case, Provenance, SpecRangeConfig, UseCase, UseCaseStatus, ValidationReport,
    Violation, ViolationCode,
};
use crate::providers::{Embedder, GenerationRequest, Generator};
use crate::store::cosine_similarity;

const EXTRACT_NAMESPACE: Uuid = Uuid::from_u128(0x6e65_7473_7065_6345_7874_7261_6374_0001);

/// Use cases whose names embed at least this close are merged.
pub const NAME_MERGE_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingConfig {
    pub max_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chars: 6000,
            overlap_chars: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub index: usize,
    /// Offset of the first character, counted in chars.
    pub start_char: usize,
    pub text: String,
}

/// Splits `text` into overlapping chunks of at most `max_chars` characters,
/// preferring to cut at a paragraph break in the second half of a chunk.
pub fn chunk_text(text: &str, cfg: &ChunkingConfig) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    let max = cfg.max_chars.max(1);
    let overlap = cfg.overlap_chars.min(max - 1);
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = (start + max).min(chars.len());
        if end < chars.len() {
            let window = &chars[start + max / 2..end];
            if let Some(p) = window.windows(2).rposition(|w| w == ['\n', '\n']) {
                end = start + max / 2 + p + 2;
            }
        }
        let piece: String = chars[start..end].iter().collect();
        if !piece.trim().is_empty() {
            chunks.push(Chunk {
                index: chunks.len(),
                start_char: start,
                text: piece,
            });
        }
        if end == chars.len() {
            break;
        }
        start = if end - start > overlap { end - overlap } else { end };
    }
    chunks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkFailure {
    pub chunk_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub document_id: String,
    pub chunks: usize,
    /// Draft use cases, in order of first appearance.
    pub use_cases: Vec<UseCase>,
    pub failures: Vec<ChunkFailure>,
}

pub struct ExtractionContext<'a> {
    pub generator: &'a dyn Generator,
    pub embedder: &'a dyn Embedder,
    pub templates: &'a TemplateRegistry,
    pub template_id: &'a str,
    pub ranges: &'a SpecRangeConfig,
    pub chunking: ChunkingConfig,
    pub max_output_chars: usize,
    pub temperature: f64,
}

/// Extracts draft use cases chunk by chunk. A chunk whose generation or
/// parsing fails is recorded and skipped; the job only fails outright when
/// the provider was unreachable for every chunk.
pub fn extract_use_cases(
    document_id: &str,
    text: &str,
    ctx: &ExtractionContext<'_>,
    mut progress: impl FnMut(usize, usize),
) -> Result<ExtractionOutcome, RagError> {
    if text.trim().is_empty() {
        return Err(RagError::InvalidInput("document text is empty".into()));
    }
    let template = ctx.templates.get(ctx.template_id)?;
    let fields = process_fields(ctx.ranges);
    let chunks = chunk_text(text, &ctx.chunking);
    let mut found: Vec<UseCase> = Vec::new();
    let mut failures = Vec::new();
    let mut last_unavailable = None;

    for chunk in &chunks {
        progress(chunk.index, chunks.len());
        let prompt = render(
            template,
            &[("document_id", document_id), ("chunk", &chunk.text), ("schema", &fields)],
        );
        let mut request = GenerationRequest::new(prompt);
        request.max_output_chars = ctx.max_output_chars;
        request.temperature = ctx.temperature;
        let response = match ctx.generator.generate(&request) {
            Ok(r) => r,
            Err(e) => {
                failures.push(ChunkFailure {
                    chunk_index: chunk.index,
                    message: e.to_string(),
                });
                if e.is_unavailable() {
                    last_unavailable = Some(e);
                }
                continue;
            }
        };
        match parse_use_case_array(&response.text, document_id, chunk.index) {
            Ok(items) => {
                for uc in items {
                    let report = validate_use_case(&uc, ctx.ranges);
                    if report.valid {
                        found.push(uc);
                    } else {
                        failures.push(ChunkFailure {
                            chunk_index: chunk.index,
                            message: format!("use case {:?} rejected: {report}", uc.name),
                        });
                    }
                }
            }
            Err(e) => failures.push(ChunkFailure {
                chunk_index: chunk.index,
                message: e.to_string(),
            }),
        }
    }
    progress(chunks.len(), chunks.len());

    if found.is_empty() && failures.len() == chunks.len() {
        if let Some(e) = last_unavailable {
            return Err(RagError::Provider(e));
        }
    }
    Ok(ExtractionOutcome {
        document_id: document_id.to_string(),
        chunks: chunks.len(),
        use_cases: merge_near_duplicates(found, ctx.embedder),
        failures,
    })
}

/// Parses `[{"name", "description", "processes": [...]}, ...]` into drafts
/// with ids derived from the document, chunk and position.
pub fn parse_use_case_array(
    raw: &str,
    document_id: &str,
    chunk_index: usize,
) -> Result<Vec<UseCase>, ParseFailure> {
    let items = parse_json_array(raw)?;
    let mut out = Vec::new();
    let mut violations = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let prefix = format!("use_cases[{i}]");
        let Value::Object(map) = item else {
            violations.push(Violation::new(&prefix, ViolationCode::Invalid, "expected an object"));
            continue;
        };
        reject_unknown(map, &["name", "description", "processes"], &prefix, &mut violations);
        let name = required_string(map, &prefix, "name", &mut violations);
        let description = required_string(map, &prefix, "description", &mut violations);
        let processes = match map.get("processes") {
            Some(Value::Array(ps)) => ps
                .iter()
                .enumerate()
                .filter_map(|(j, p)| {
                    let mut process =
                        process_from_value(p, j, &format!("{prefix}.processes[{j}]"), &mut violations)?;
                    process.id = Uuid::new_v5(
                        &EXTRACT_NAMESPACE,
                        format!("{document_id}:{chunk_index}:{i}:{j}").as_bytes(),
                    );
                    Some(process)
                })
                .collect(),
            _ => {
                violations.push(Violation::new(
                    format!("{prefix}.processes"),
                    ViolationCode::Missing,
                    "expected an array of processes",
                ));
                Vec::new()
            }
        };
        if let (Some(name), Some(description)) = (name, description) {
            let mut uc = UseCase::new(name, description);
            uc.id = Uuid::new_v5(
                &EXTRACT_NAMESPACE,
                format!("{document_id}:{chunk_index}:{i}").as_bytes(),
            );
            uc.processes = processes;
            uc.status = UseCaseStatus::Draft;
            uc.provenance = Provenance::SeedDocument {
                document_id: document_id.to_string(),
            };
            out.push(uc);
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(ParseFailure::SchemaViolation(ValidationReport::from_violations(violations)))
    }
}

/// Folds use cases whose names embed within [`NAME_MERGE_THRESHOLD`] into
/// the first occurrence, adding processes with names not already present.
pub fn merge_near_duplicates(use_cases: Vec<UseCase>, embedder: &dyn Embedder) -> Vec<UseCase> {
    let mut kept: Vec<(UseCase, Option<Vec<f64>>)> = Vec::new();
    for uc in use_cases {
        let v = embedder.embed(&uc.name).ok().map(|v| v.into_inner());
        let twin = v.as_ref().and_then(|v| {
            kept.iter().position(|(_, kv)| {
                kv.as_ref()
                    .and_then(|kv| cosine_similarity(v, kv).ok())
                    .is_some_and(|s| s >= NAME_MERGE_THRESHOLD)
            })
        });
        match twin {
            Some(k) => {
                let target = &mut kept[k].0;
                for p in uc.processes {
                    let dup = target
                        .processes
                        .iter()
                        .any(|q| q.name.eq_ignore_ascii_case(&p.name));
                    if !dup {
                        target.processes.push(p);
                    }
                }
            }
            None => kept.push((uc, v)),
        }
    }
    kept.into_iter().map(|(uc, _)| uc).collect()
}
