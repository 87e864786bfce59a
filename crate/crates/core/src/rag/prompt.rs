use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RagError;
use crate::ontology::{Direction, Metric, NetworkSpecification, SpecRangeConfig, UseCase};

pub const SPECIFY_TEMPLATE: &str = "specify_v1";
pub const EXTRACT_TEMPLATE: &str = "extract_v1";
pub const DEFAULT_TOKEN_BUDGET_CHARS: usize = 24_000;

pub const NO_CONTEXT_BLOCK: &str = "(No similar use cases were found in the knowledge database. \
Rely on general knowledge of 6G capabilities and keep every value inside the stated ranges.)";

/// Prompt templates keyed by id. Templates use `{{name}}` placeholders.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            SPECIFY_TEMPLATE.to_string(),
            include_str!("../../templates/specify_v1.txt").to_string(),
        );
        templates.insert(
            EXTRACT_TEMPLATE.to_string(),
            include_str!("../../templates/extract_v1.txt").to_string(),
        );
        Self { templates }
    }
}

impl TemplateRegistry {
    /// Built-in templates overlaid with every `*.txt` file in `dir`; the
    /// file stem is the template id.
    pub fn with_dir(dir: &Path) -> std::io::Result<Self> {
        let mut reg = Self::default();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    reg.templates
                        .insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(reg)
    }

    pub fn insert(&mut self, id: impl Into<String>, template: impl Into<String>) {
        self.templates.insert(id.into(), template.into());
    }

    pub fn get(&self, id: &str) -> Result<&str, RagError> {
        self.templates
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| RagError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

/// Substitutes `{{key}}` placeholders in one pass; substituted text is never
/// rescanned. Unknown placeholders are left as written.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = after[..close].trim();
                match values.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 4 + close]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Output-format instructions derived from the ontology and active ranges.
/// The three metadata attributes are listed before the metrics.
pub fn output_schema(ranges: &SpecRangeConfig) -> String {
    format!(
        "Output format: respond with a JSON array only, inside a ```json fenced block. \
Each element is one communication process with these fields, in this order:\n{}",
        process_fields(ranges)
    )
}

/// Field-by-field description of one communication process.
pub fn process_fields(ranges: &SpecRangeConfig) -> String {
    let mut s = String::new();
    s.push_str("  \"name\": string, short name of the process\n");
    s.push_str("  \"description\": string, what is exchanged and why\n");
    s.push_str("  \"is_real_time\": boolean, whether the exchange must happen in real time\n");
    s.push_str("  \"direction\": \"transmit\" or \"receive\", seen from the use case device\n");
    s.push_str(
        "  \"message_type\": string, the kind of message (e.g. \"sensor point cloud\", \"control command\")\n",
    );
    s.push_str(
        "  \"specification\": object with the following numeric fields; omit any metric the process does not depend on:\n",
    );
    for m in Metric::ALL {
        let r = ranges.get(m);
        let _ = writeln!(
            s,
            "    \"{}\": {} in {}, between {} and {} ({} is better)",
            m.field_name(),
            m.label().to_lowercase(),
            m.unit(),
            r.min,
            r.max,
            match r.better {
                crate::ontology::Better::Higher => "higher",
                crate::ontology::Better::Lower => "lower",
            }
        );
    }
    s.push_str(
        "Decide is_real_time, direction and message_type first: they determine which metrics matter and how demanding each value must be. Use no other fields.",
    );
    s
}

#[derive(Serialize)]
struct ProcessView<'a> {
    name: &'a str,
    description: &'a str,
    is_real_time: bool,
    direction: Direction,
    message_type: &'a str,
    specification: &'a NetworkSpecification,
}

#[derive(Serialize)]
struct ContextView<'a> {
    name: &'a str,
    description: &'a str,
    processes: Vec<ProcessView<'a>>,
}

/// A use case returned by retrieval together with its similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedUseCase {
    pub use_case: UseCase,
    pub similarity: f64,
}

/// Compact JSON form of a retrieved use case as shown to the model.
pub fn serialize_context(rank: usize, hit: &RetrievedUseCase) -> String {
    let uc = &hit.use_case;
    let view = ContextView {
        name: &uc.name,
        description: &uc.description,
        processes: uc
            .processes
            .iter()
            .map(|p| ProcessView {
                name: &p.name,
                description: &p.description,
                is_real_time: p.is_real_time,
                direction: p.direction,
                message_type: &p.message_type,
                specification: &p.specification,
            })
            .collect(),
    };
    format!(
        "[{rank}] similarity {:.4}\n{}",
        hit.similarity,
        serde_json::to_string(&view).expect("context view serializes")
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub query_name: String,
    pub query_description: String,
    /// Serialized contexts that made it into the prompt, in rank order.
    pub contexts: Vec<String>,
    pub rendered: String,
    pub token_budget_chars: usize,
}

/// Renders the query and retrieved use cases into one prompt. Contexts are
/// dropped whole from the tail until the prompt fits the character budget.
pub fn assemble_prompt(
    templates: &TemplateRegistry,
    template_id: &str,
    name: &str,
    description: &str,
    hits: &[RetrievedUseCase],
    ranges: &SpecRangeConfig,
    token_budget_chars: usize,
) -> Result<PromptBundle, RagError> {
    if description.trim().is_empty() {
        return Err(RagError::InvalidInput("description must not be empty".into()));
    }
    let template = templates.get(template_id)?;
    let schema = output_schema(ranges);
    let all: Vec<String> = hits
        .iter()
        .enumerate()
        .map(|(i, h)| serialize_context(i + 1, h))
        .collect();
    let mut keep = all.len();
    loop {
        let contexts = &all[..keep];
        let block = if contexts.is_empty() {
            NO_CONTEXT_BLOCK.to_string()
        } else {
            contexts.join("\n\n")
        };
        let rendered = render(
            template,
            &[
                ("query_name", name),
                ("query_description", description),
                ("contexts", &block),
                ("schema", &schema),
            ],
        );
        let len = rendered.chars().count();
        if len <= token_budget_chars {
            return Ok(PromptBundle {
                template_id: template_id.to_string(),
                query_name: name.to_string(),
                query_description: description.to_string(),
                contexts: contexts.to_vec(),
                rendered,
                token_budget_chars,
            });
        }
        if keep == 0 {
            return Err(RagError::PromptTooLarge {
                chars: len,
                budget: token_budget_chars,
            });
        }
        keep -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{CommunicationProcess, UseCaseStatus};

    fn hit(i: usize) -> RetrievedUseCase {
        let uc = UseCase::new(format!("Reference {i}"), format!("reference description number {i}"))
            .with_process(CommunicationProcess::new(
                "link",
                "data",
                true,
                Direction::Receive,
                "frames",
                NetworkSpecification::default().with(Metric::Latency, 10.0),
            ))
            .with_status(UseCaseStatus::Published);
        RetrievedUseCase {
            use_case: uc,
            similarity: 1.0 - i as f64 / 10.0,
        }
    }

    #[test]
    fn render_is_single_pass() {
        let out = render("a {{x}} b {{y}} {{unknown}} {{", &[("x", "{{y}}"), ("y", "Y")]);
        assert_eq!(out, "a {{y}} b Y {{unknown}} {{");
    }

    #[test]
    fn zero_hits_uses_fallback_block() {
        let reg = TemplateRegistry::default();
        let p = assemble_prompt(
            &reg,
            SPECIFY_TEMPLATE,
            "Drone delivery",
            "Parcels delivered by autonomous drones",
            &[],
            &SpecRangeConfig::default(),
            DEFAULT_TOKEN_BUDGET_CHARS,
        )
        .unwrap();
        assert!(p.rendered.contains(NO_CONTEXT_BLOCK));
        assert_eq!(p.rendered.matches("Parcels delivered by autonomous drones").count(), 1);
        assert!(p.contexts.is_empty());
    }

    #[test]
    fn contexts_in_rank_order() {
        let reg = TemplateRegistry::default();
        let hits: Vec<_> = (1..=5).map(hit).collect();
        let p = assemble_prompt(
            &reg,
            SPECIFY_TEMPLATE,
            "Q",
            "query text",
            &hits,
            &SpecRangeConfig::default(),
            DEFAULT_TOKEN_BUDGET_CHARS,
        )
        .unwrap();
        assert_eq!(p.contexts.len(), 5);
        let positions: Vec<usize> = (1..=5)
            .map(|i| p.rendered.find(&format!("Reference {i}\"")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tail_contexts_are_dropped_whole() {
        let reg = TemplateRegistry::default();
        let hits: Vec<_> = (1..=5).map(hit).collect();
        let ranges = SpecRangeConfig::default();
        let full = assemble_prompt(&reg, SPECIFY_TEMPLATE, "Q", "query text", &hits, &ranges, usize::MAX)
            .unwrap();
        let ctx_len = |i: usize| full.contexts[i].chars().count() + 2;
        let budget = full.rendered.chars().count() - ctx_len(4) - ctx_len(3);
        let p = assemble_prompt(&reg, SPECIFY_TEMPLATE, "Q", "query text", &hits, &ranges, budget).unwrap();
        assert_eq!(p.contexts, full.contexts[..3]);
        assert!(p.rendered.chars().count() <= budget);
        assert!(!p.rendered.contains("Reference 4"));
    }

    #[test]
    fn unknown_template_and_tiny_budget() {
        let reg = TemplateRegistry::default();
        let ranges = SpecRangeConfig::default();
        assert!(matches!(
            assemble_prompt(&reg, "nope", "Q", "d", &[], &ranges, 100_000),
            Err(RagError::UnknownTemplate(_))
        ));
        assert!(matches!(
            assemble_prompt(&reg, SPECIFY_TEMPLATE, "Q", "d", &[], &ranges, 10),
            Err(RagError::PromptTooLarge { .. })
        ));
        assert!(matches!(
            assemble_prompt(&reg, SPECIFY_TEMPLATE, "Q", "  ", &[], &ranges, 100_000),
            Err(RagError::InvalidInput(_))
        ));
    }

    #[test]
    fn schema_lists_metadata_before_metrics() {
        let s = output_schema(&SpecRangeConfig::default());
        let meta = s.find("\"message_type\"").unwrap();
        for m in Metric::ALL {
            assert!(s.find(m.field_name()).unwrap() > meta, "{m:?}");
        }
        assert!(s.contains("between 0.1 and 10000"));
    }

    #[test]
    fn directory_templates_override_builtins() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("short.txt"), "{{query_description}}").unwrap();
        let reg = TemplateRegistry::with_dir(dir.path()).unwrap();
        assert_eq!(reg.get("short").unwrap(), "{{query_description}}");
        assert!(reg.get(SPECIFY_TEMPLATE).is_ok());
    }
}
