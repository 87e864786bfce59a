use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{GenerationRequest, GenerationResponse, Generator, ProviderError};

#[derive(Debug, Clone)]
struct Rule {
    pattern: String,
    response: String,
}

/// A generator that answers from a fixed (substring → text) table.
///
/// Rules are tried in order; the first whose pattern occurs in the prompt
/// (case-sensitive) wins. An empty pattern matches everything.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    id: String,
    rules: Vec<Rule>,
    delay: Option<Duration>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    #[serde(rename = "match")]
    pattern: String,
    response_file: PathBuf,
}

impl ScriptedGenerator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            rules: Vec::new(),
            delay: None,
        }
    }

    pub fn rule(mut self, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(Rule {
            pattern: pattern.into(),
            response: response.into(),
        });
        self
    }

    /// Sleeps before answering; simulates a slow provider.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    /// Loads a script file: a JSON array of `{"match", "response_file"}`.
    /// Relative response paths resolve against the script's directory.
    pub fn from_script_file(id: impl Into<String>, path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
            .map_err(|e| ProviderError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut generator = Self::new(id);
        for entry in entries {
            let file = base.join(&entry.response_file);
            let response = std::fs::read_to_string(&file)
                .map_err(|e| ProviderError::InvalidConfig(format!("{}: {e}", file.display())))?;
            generator = generator.rule(entry.pattern, response);
        }
        Ok(generator)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl Generator for ScriptedGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        if req.prompt.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let start = Instant::now();
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        let rule = self
            .rules
            .iter()
            .find(|r| req.prompt.contains(&r.pattern))
            .ok_or(ProviderError::NoScriptMatch)?;
        Ok(GenerationResponse::new(
            &rule.response,
            req.max_output_chars,
            self.id.clone(),
            start.elapsed(),
        ))
    }
}
