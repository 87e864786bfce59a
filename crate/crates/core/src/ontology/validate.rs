use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{CommunicationProcess, UseCase, MAX_DESCRIPTION_CHARS, MAX_NAME_CHARS};
use super::ranges::SpecRangeConfig;
use super::spec::NetworkSpecification;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    Missing,
    OutOfRange,
    NotFinite,
    Duplicate,
    Empty,
    /// Wrong JSON type or a value outside an enumerated set.
    Invalid,
    /// Field not part of the ontology.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub code: ViolationCode,
    pub detail: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, code: ViolationCode, detail: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            code,
            detail: detail.into(),
        }
    }
}

/// Outcome of a validation pass. `valid` is true iff there are no violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn ok() -> Self {
        Self::from_violations(Vec::new())
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn paths(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.path.as_str()).collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.valid {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            let path = if v.path.is_empty() { "<root>" } else { &v.path };
            write!(f, "{path}: {}", v.detail)?;
        }
        Ok(())
    }
}

fn join(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

/// Checks every present metric against `ranges`. Paths are bare field names;
/// an all-absent specification yields a single `Empty` violation at the root.
pub fn validate_spec(spec: &NetworkSpecification, ranges: &SpecRangeConfig) -> ValidationReport {
    let mut out = Vec::new();
    spec_violations(spec, ranges, "", &mut out);
    ValidationReport::from_violations(out)
}

fn spec_violations(
    spec: &NetworkSpecification,
    ranges: &SpecRangeConfig,
    prefix: &str,
    out: &mut Vec<Violation>,
) {
    if spec.is_empty() {
        out.push(Violation::new(
            prefix,
            ViolationCode::Empty,
            "specification constrains no metric",
        ));
        return;
    }
    for (metric, value) in spec.present() {
        let path = join(prefix, metric.field_name());
        let range = ranges.get(metric);
        if !value.is_finite() {
            out.push(Violation::new(path, ViolationCode::NotFinite, format!("{value} is not finite")));
        } else if !range.contains(value) {
            out.push(Violation::new(
                path,
                ViolationCode::OutOfRange,
                format!(
                    "{value} {} outside [{}, {}]",
                    metric.unit(),
                    range.min,
                    range.max
                ),
            ));
        }
    }
}

fn text_violations(value: &str, path: String, max_chars: Option<usize>, out: &mut Vec<Violation>) {
    if value.trim().is_empty() {
        out.push(Violation::new(path, ViolationCode::Empty, "must not be empty"));
    } else if let Some(max) = max_chars {
        let n = value.chars().count();
        if n > max {
            out.push(Violation::new(
                path,
                ViolationCode::OutOfRange,
                format!("{n} characters exceeds limit of {max}"),
            ));
        }
    }
}

fn process_structure(p: &CommunicationProcess, prefix: &str, out: &mut Vec<Violation>) {
    text_violations(&p.name, join(prefix, "name"), None, out);
    text_violations(&p.description, join(prefix, "description"), None, out);
    text_violations(&p.message_type, join(prefix, "message_type"), None, out);
}

/// Validates a list of processes as they would appear inside a use case:
/// structural checks first, then per-process specification checks.
pub fn validate_processes(
    processes: &[CommunicationProcess],
    ranges: &SpecRangeConfig,
) -> ValidationReport {
    let mut out = Vec::new();
    processes_structure(processes, &mut out);
    for (i, p) in processes.iter().enumerate() {
        spec_violations(&p.specification, ranges, &format!("processes[{i}].specification"), &mut out);
    }
    ValidationReport::from_violations(out)
}

fn processes_structure(processes: &[CommunicationProcess], out: &mut Vec<Violation>) {
    if processes.is_empty() {
        out.push(Violation::new(
            "processes",
            ViolationCode::Missing,
            "a use case needs at least one communication process",
        ));
    }
    let mut seen = HashMap::new();
    for (i, p) in processes.iter().enumerate() {
        let prefix = format!("processes[{i}]");
        if let Some(first) = seen.insert(p.id, i) {
            seen.insert(p.id, first);
            out.push(Violation::new(
                join(&prefix, "id"),
                ViolationCode::Duplicate,
                format!("id {} already used by processes[{first}]", p.id),
            ));
        }
        process_structure(p, &prefix, out);
    }
}

pub fn validate_use_case(uc: &UseCase, ranges: &SpecRangeConfig) -> ValidationReport {
    let mut out = Vec::new();
    text_violations(&uc.name, "name".into(), Some(MAX_NAME_CHARS), &mut out);
    text_violations(
        &uc.description,
        "description".into(),
        Some(MAX_DESCRIPTION_CHARS),
        &mut out,
    );
    processes_structure(&uc.processes, &mut out);
    for (i, p) in uc.processes.iter().enumerate() {
        spec_violations(
            &p.specification,
            ranges,
            &format!("processes[{i}].specification"),
            &mut out,
        );
    }
    ValidationReport::from_violations(out)
}
