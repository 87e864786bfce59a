use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::community::CommunityConfig;
use crate::providers::{EmbeddingProviderConfig, GenerationProviderConfig};
use crate::rag::EngineConfig;
use crate::service::ServiceConfig;

pub const ENV_PREFIX: &str = "NETSPEC_";

/// Operator configuration, read from one JSON file. Relative paths resolve
/// against the file's directory. Environment variables win over the file:
/// `NETSPEC_DATA_DIR`, `NETSPEC_LISTEN_ADDR`, `NETSPEC_OPERATOR_KEY`,
/// `NETSPEC_RANGES_FILE`, `NETSPEC_TEMPLATE_DIR`, `NETSPEC_DEFAULT_GENERATOR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub embedding: EmbeddingProviderConfig,
    pub generation: Vec<GenerationProviderConfig>,
    /// Defaults to the first entry of `generation`.
    pub default_generator: Option<String>,
    pub ranges_file: Option<PathBuf>,
    pub template_dir: Option<PathBuf>,
    pub listen_addr: String,
    pub engine: EngineConfig,
    pub community: CommunityConfig,
    pub service: ServiceConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("netspec-data"),
            embedding: EmbeddingProviderConfig::default(),
            generation: Vec::new(),
            default_generator: None,
            ranges_file: None,
            template_dir: None,
            listen_addr: "127.0.0.1:8080".into(),
            engine: EngineConfig::default(),
            community: CommunityConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl CliConfig {
    /// Loads `path` (or defaults when `None`) and applies environment
    /// overrides from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                let mut de = serde_json::Deserializer::from_str(&text);
                let mut c: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::Invalid {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                c.resolve_relative(p.parent().unwrap_or(Path::new(".")));
                c
            }
        };
        let var = |name: &str| env(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        if let Some(v) = var("DATA_DIR") {
            config.data_dir = v.into();
        }
        if let Some(v) = var("LISTEN_ADDR") {
            config.listen_addr = v;
        }
        if let Some(v) = var("OPERATOR_KEY") {
            config.service.operator_key = Some(v);
        }
        if let Some(v) = var("RANGES_FILE") {
            config.ranges_file = Some(v.into());
        }
        if let Some(v) = var("TEMPLATE_DIR") {
            config.template_dir = Some(v.into());
        }
        if let Some(v) = var("DEFAULT_GENERATOR") {
            config.default_generator = Some(v);
        }
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        if let Some(p) = self.ranges_file.as_mut() {
            fix(p);
        }
        if let Some(p) = self.template_dir.as_mut() {
            fix(p);
        }
        for g in &mut self.generation {
            if let GenerationProviderConfig::Scripted { script_file, .. } = g {
                fix(script_file);
            }
        }
    }
}
