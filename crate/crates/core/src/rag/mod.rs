//! Retrieval-augmented generation: prompt assembly, output parsing, radar
//! normalization, document extraction and the end-to-end pipeline.

mod engine;
mod extract;
mod parser;
mod prompt;
mod radar;

use thiserror::Error;

pub use engine::{EngineConfig, GenerationOutcome, RagEngine, SpecifyRequest};
pub use extract::{
    chunk_text, extract_use_cases, merge_near_duplicates, parse_use_case_array, Chunk,
    ChunkFailure, ChunkingConfig, ExtractionContext, ExtractionOutcome, NAME_MERGE_THRESHOLD,
};
pub use parser::{parse_generation, select_candidate, Candidate, ParseFailure};
pub(crate) use parser::process_from_value as parse_process_value;
pub use prompt::{
    assemble_prompt, output_schema, process_fields, render, serialize_context, PromptBundle,
    RetrievedUseCase, TemplateRegistry, DEFAULT_TOKEN_BUDGET_CHARS, EXTRACT_TEMPLATE,
    NO_CONTEXT_BLOCK, SPECIFY_TEMPLATE,
};
pub use radar::{axis_value, process_radar, radar_axes, ProcessRadar, RadarAxes, RadarAxis};

use crate::providers::ProviderError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("unknown generation provider {0:?}")]
    UnknownProvider(String),
    #[error("prompt needs {chars} characters without any context, budget is {budget}")]
    PromptTooLarge { chars: usize, budget: usize },
    #[error("provider failed: {0}")]
    Provider(#[source] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("model output unusable after {attempts} attempts: {failure}")]
    ExhaustedRetries {
        attempts: usize,
        failure: ParseFailure,
        raw_model_text: String,
    },
}
