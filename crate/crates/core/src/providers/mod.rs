//! Text embedding and text generation behind swappable interfaces.
//!
//! Two offline implementations keep every test reproducible: a
//! feature-hashing [`DeterministicEmbedder`] and a table-driven
//! [`ScriptedGenerator`]. The `remote` clients speak the JSON schema used by
//! hosted embedding and chat-completion endpoints.

mod local;
mod remote;
mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use local::{fnv1a64, tokenize, DeterministicEmbedder, DEFAULT_DIMENSION, MIN_DIMENSION};
pub use remote::{HttpSettings, RemoteEmbedder, RemoteGenerator};
pub use scripted::ScriptedGenerator;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("input text has no embeddable content")]
    EmptyInput,
    #[error("remote provider unavailable after {elapsed:?}: {message}")]
    RemoteUnavailable {
        message: String,
        retry_after: Option<Duration>,
        elapsed: Duration,
    },
    #[error("remote provider rejected the request with HTTP {status}: {body}")]
    RemoteRejected { status: u16, body: String },
    #[error("embedding has dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no scripted response matches the prompt")]
    NoScriptMatch,
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("input {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<ProviderError>,
    },
}

impl ProviderError {
    fn unwrap_batch(self) -> Self {
        match self {
            ProviderError::AtIndex { source, .. } => *source,
            other => other,
        }
    }

    /// The error with any batch index annotation removed.
    pub fn root(&self) -> &ProviderError {
        match self {
            ProviderError::AtIndex { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for faults of the provider itself rather than of the input.
    pub fn is_unavailable(&self) -> bool {
        matches!(
            self.root(),
            ProviderError::RemoteUnavailable { .. }
                | ProviderError::RemoteRejected { .. }
                | ProviderError::MalformedResponse(_)
                | ProviderError::DimensionMismatch { .. }
                | ProviderError::NoScriptMatch
        )
    }
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes `values`; `None` if they are all zero or not finite.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Some(Self(values))
    }

    /// Wraps values as-is. Used for stored vectors that are already unit
    /// norm and for tests.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub trait Embedder: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;

    /// Embeds every text in order; failures carry the offending index.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                self.embed(t).map_err(|e| ProviderError::AtIndex {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

pub const DEFAULT_MAX_OUTPUT_CHARS: usize = 32_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_output_chars: usize,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_output_chars: DEFAULT_MAX_OUTPUT_CHARS,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub provider_id: String,
    pub latency_ms: f64,
}

impl GenerationResponse {
    /// Builds a response, cutting `text` to at most `max_chars` characters.
    pub fn new(text: &str, max_chars: usize, provider_id: String, latency: Duration) -> Self {
        let text = match text.char_indices().nth(max_chars) {
            Some((cut, _)) => text[..cut].to_string(),
            None => text.to_string(),
        };
        Self {
            text,
            provider_id,
            latency_ms: latency.as_secs_f64() * 1e3,
        }
    }
}

pub trait Generator: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    DeterministicLocal,
    RemoteHttp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingProviderConfig {
    pub kind: EmbeddingKind,
    pub dimension: usize,
    /// Only read for `remote_http`.
    pub http: Option<HttpSettings>,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::DeterministicLocal,
            dimension: DEFAULT_DIMENSION,
            http: None,
        }
    }
}

impl EmbeddingProviderConfig {
    pub fn build(&self) -> Result<Arc<dyn Embedder>, ProviderError> {
        if self.dimension < MIN_DIMENSION {
            return Err(ProviderError::InvalidConfig(format!(
                "embedding dimension must be at least {MIN_DIMENSION}"
            )));
        }
        Ok(match self.kind {
            EmbeddingKind::DeterministicLocal => Arc::new(DeterministicEmbedder::new(self.dimension)?),
            EmbeddingKind::RemoteHttp => {
                let http = self.http.clone().ok_or_else(|| {
                    ProviderError::InvalidConfig("remote_http embedding needs `http` settings".into())
                })?;
                Arc::new(RemoteEmbedder::new(http, self.dimension))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationProviderConfig {
    Scripted {
        id: String,
        script_file: PathBuf,
    },
    RemoteHttp {
        id: String,
        #[serde(flatten)]
        http: HttpSettings,
    },
}

impl GenerationProviderConfig {
    pub fn id(&self) -> &str {
        match self {
            Self::Scripted { id, .. } | Self::RemoteHttp { id, .. } => id,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Generator>, ProviderError> {
        Ok(match self {
            Self::Scripted { id, script_file } => {
                Arc::new(ScriptedGenerator::from_script_file(id.clone(), script_file)?)
            }
            Self::RemoteHttp { id, http } => {
                Arc::new(RemoteGenerator::new(http.clone()).with_id(id.clone()))
            }
        })
    }
}
