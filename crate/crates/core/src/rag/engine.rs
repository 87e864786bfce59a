use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::extract::{extract_use_cases, ChunkingConfig, ExtractionContext, ExtractionOutcome};
use super::parser::{parse_generation, ParseFailure};
use super::prompt::{
    assemble_prompt, PromptBundle, RetrievedUseCase, TemplateRegistry, DEFAULT_TOKEN_BUDGET_CHARS,
    EXTRACT_TEMPLATE, SPECIFY_TEMPLATE,
};
use super::RagError;
use crate::ontology::{embedded_text, validate_processes, CommunicationProcess, ValidationReport};
use crate::providers::{GenerationRequest, Generator, DEFAULT_MAX_OUTPUT_CHARS};
use crate::store::{RetrievalQuery, RetrievalResult, Store, DEFAULT_TOP_N};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub token_budget_chars: usize,
    /// Extra attempts after an unparseable answer.
    pub max_retries: usize,
    pub max_output_chars: usize,
    pub temperature: f64,
    pub specify_template: String,
    pub extract_template: String,
    pub chunking: ChunkingConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            token_budget_chars: DEFAULT_TOKEN_BUDGET_CHARS,
            max_retries: 2,
            max_output_chars: DEFAULT_MAX_OUTPUT_CHARS,
            temperature: 0.0,
            specify_template: SPECIFY_TEMPLATE.to_string(),
            extract_template: EXTRACT_TEMPLATE.to_string(),
            chunking: ChunkingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecifyRequest {
    #[serde(default)]
    pub name: String,
    pub description: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub template_id: Option<String>,
    #[serde(default)]
    pub provider_id: Option<String>,
}

fn default_n() -> usize {
    DEFAULT_TOP_N
}

impl SpecifyRequest {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            n: DEFAULT_TOP_N,
            template_id: None,
            provider_id: None,
        }
    }

    pub fn top(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub processes: Vec<CommunicationProcess>,
    pub similar_use_cases: RetrievalResult,
    /// Range check of the generated values. Out-of-range values are reported
    /// here rather than failing the request.
    pub validation: ValidationReport,
    pub raw_model_text: String,
    pub provider_id: String,
    pub retry_count: usize,
    pub prompt: PromptBundle,
}

/// Retrieval-augmented specification generator over a shared store.
#[derive(Debug)]
pub struct RagEngine {
    store: Arc<Store>,
    generators: BTreeMap<String, Arc<dyn Generator>>,
    default_generator: String,
    templates: TemplateRegistry,
    config: EngineConfig,
}

impl RagEngine {
    pub fn new(store: Arc<Store>, generator: Arc<dyn Generator>) -> Self {
        let id = generator.id().to_string();
        Self {
            store,
            generators: BTreeMap::from([(id.clone(), generator)]),
            default_generator: id,
            templates: TemplateRegistry::default(),
            config: EngineConfig::default(),
        }
    }

    /// Registers another generator selectable by id per request.
    pub fn with_generator(mut self, generator: Arc<dyn Generator>) -> Self {
        self.generators.insert(generator.id().to_string(), generator);
        self
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    pub fn generator_ids(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    pub fn generator(&self, id: Option<&str>) -> Result<&Arc<dyn Generator>, RagError> {
        let id = id.unwrap_or(&self.default_generator);
        self.generators
            .get(id)
            .ok_or_else(|| RagError::UnknownProvider(id.to_string()))
    }

    /// Retrieves similar use cases, prompts the generator and parses its
    /// answer into communication processes. An unparseable answer is retried
    /// with the parse error appended to the prompt.
    pub fn generate_specification(&self, req: &SpecifyRequest) -> Result<GenerationOutcome, RagError> {
        if req.description.trim().is_empty() {
            return Err(RagError::InvalidInput("description must not be empty".into()));
        }
        let generator = self.generator(req.provider_id.as_deref())?;
        let template_id = req.template_id.as_deref().unwrap_or(&self.config.specify_template);
        self.templates.get(template_id)?;

        let query_text = if req.name.trim().is_empty() {
            req.description.clone()
        } else {
            embedded_text(&req.name, &req.description)
        };
        let similar = self.store.retrieve(&RetrievalQuery::new(query_text).top(req.n))?;
        let state = self.store.read();
        let hits: Vec<RetrievedUseCase> = similar
            .hits
            .iter()
            .filter_map(|h| {
                state.use_case(&h.use_case_id).map(|uc| RetrievedUseCase {
                    use_case: uc.clone(),
                    similarity: h.similarity,
                })
            })
            .collect();
        let ranges = state.ranges().clone();
        drop(state);

        let bundle = assemble_prompt(
            &self.templates,
            template_id,
            &req.name,
            &req.description,
            &hits,
            &ranges,
            self.config.token_budget_chars,
        )?;

        let mut prompt = bundle.rendered.clone();
        let mut last: Option<(ParseFailure, String)> = None;
        for attempt in 0..=self.config.max_retries {
            let mut request = GenerationRequest::new(prompt.clone());
            request.max_output_chars = self.config.max_output_chars;
            request.temperature = self.config.temperature;
            let response = generator.generate(&request).map_err(RagError::Provider)?;
            match parse_generation(&response.text) {
                Ok(processes) => {
                    tracing::debug!(attempt, provider = %response.provider_id, "specification generated");
                    return Ok(GenerationOutcome {
                        validation: validate_processes(&processes, &ranges),
                        processes,
                        similar_use_cases: similar,
                        raw_model_text: response.text,
                        provider_id: response.provider_id,
                        retry_count: attempt,
                        prompt: bundle,
                    });
                }
                Err(failure) => {
                    tracing::warn!(attempt, %failure, "model output could not be parsed");
                    prompt = format!(
                        "{}\n\nYour previous answer could not be used: {failure}. \
Reply again with only the JSON array described above, inside a ```json fenced block.",
                        bundle.rendered
                    );
                    last = Some((failure, response.text));
                }
            }
        }
        let (failure, raw_model_text) = last.expect("at least one attempt was made");
        Err(RagError::ExhaustedRetries {
            attempts: self.config.max_retries + 1,
            failure,
            raw_model_text,
        })
    }

    /// Extracts draft use cases from a document with the default generator.
    pub fn extract(
        &self,
        document_id: &str,
        text: &str,
        progress: impl FnMut(usize, usize),
    ) -> Result<ExtractionOutcome, RagError> {
        let generator = self.generator(None)?;
        let ranges = self.store.ranges();
        let ctx = ExtractionContext {
            generator: generator.as_ref(),
            embedder: self.store.embedder().as_ref(),
            templates: &self.templates,
            template_id: &self.config.extract_template,
            ranges: &ranges,
            chunking: self.config.chunking,
            max_output_chars: self.config.max_output_chars,
            temperature: self.config.temperature,
        };
        extract_use_cases(document_id, text, &ctx, progress)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{Direction, Metric, NetworkSpecification, UseCase, UseCaseStatus};
    use crate::providers::{DeterministicEmbedder, ScriptedGenerator};

    const GOOD: &str = r#"```json
[{"name":"telemetry","description":"vehicle state","is_real_time":true,"direction":"transmit",
  "message_type":"status","specification":{"latency_ms":5,"reliability_percentage":99.999}}]
```"#;

    fn store() -> Arc<Store> {
        let s = Store::in_memory(Arc::new(DeterministicEmbedder::default()));
        let uc = UseCase::new("Teleoperated driving", "remote drivers steer vehicles over the network")
            .with_process(CommunicationProcess::new(
                "video",
                "camera feed",
                true,
                Direction::Transmit,
                "frames",
                NetworkSpecification::default().with(Metric::Latency, 10.0),
            ))
            .with_status(UseCaseStatus::Published);
        s.upsert_use_case(uc).unwrap();
        Arc::new(s)
    }

    #[test]
    fn happy_path_logs_retrieval_and_parses() {
        let store = store();
        let engine = RagEngine::new(store.clone(), Arc::new(ScriptedGenerator::new("s").rule("", GOOD)));
        let out = engine
            .generate_specification(&SpecifyRequest::new("Remote driving", "steer vehicles remotely"))
            .unwrap();
        assert_eq!(out.processes.len(), 1);
        assert!(out.validation.valid);
        assert_eq!(out.retry_count, 0);
        assert_eq!(out.similar_use_cases.hits.len(), 1);
        assert_eq!(store.retrieval_log().len(), 1);
        assert_eq!(out.prompt.contexts.len(), 1);
    }

    #[test]
    fn retries_with_correction_then_succeeds() {
        let gen = ScriptedGenerator::new("s")
            .rule("could not be used", GOOD)
            .rule("", "Sorry, no JSON here.");
        let engine = RagEngine::new(store(), Arc::new(gen));
        let out = engine
            .generate_specification(&SpecifyRequest::new("x", "steer vehicles"))
            .unwrap();
        assert_eq!(out.retry_count, 1);
    }

    #[test]
    fn exhausted_retries_keep_raw_text() {
        let engine = RagEngine::new(store(), Arc::new(ScriptedGenerator::new("s").rule("", "[oops")));
        match engine.generate_specification(&SpecifyRequest::new("x", "steer vehicles")) {
            Err(RagError::ExhaustedRetries {
                attempts,
                raw_model_text,
                ..
            }) => {
                assert_eq!(attempts, 3);
                assert_eq!(raw_model_text, "[oops");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_values_are_reported_not_fatal() {
        let raw = GOOD.replace("\"latency_ms\":5", "\"latency_ms\":0.001");
        let engine = RagEngine::new(store(), Arc::new(ScriptedGenerator::new("s").rule("", raw)));
        let out = engine
            .generate_specification(&SpecifyRequest::new("x", "steer vehicles"))
            .unwrap();
        assert!(!out.validation.valid);
        assert_eq!(out.validation.paths(), ["processes[0].specification.latency_ms"]);
    }

    #[test]
    fn unknown_provider_and_empty_description() {
        let engine = RagEngine::new(store(), Arc::new(ScriptedGenerator::new("s").rule("", GOOD)));
        let mut req = SpecifyRequest::new("x", "y");
        req.provider_id = Some("missing".into());
        assert!(matches!(engine.generate_specification(&req), Err(RagError::UnknownProvider(_))));
        assert!(matches!(
            engine.generate_specification(&SpecifyRequest::new("x", " ")),
            Err(RagError::InvalidInput(_))
        ));
    }
}
