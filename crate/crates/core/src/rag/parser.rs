//! Recovers communication processes from free-form model output.

use serde_json::{Map, Value};
use thiserror::Error;
use uuid::Uuid;

use crate::ontology::{
    CommunicationProcess, Direction, Metric, NetworkSpecification, ValidationReport, Violation,
    ViolationCode,
};
use crate::store::snapshot_byte_offset;

/// Namespace for ids assigned to processes the model did not number.
const PROCESS_NAMESPACE: Uuid = Uuid::from_u128(0x6e65_7473_7065_6350_726f_6365_7373_0001);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseFailure {
    #[error("no JSON array found in model output")]
    NoJsonFound,
    #[error("invalid JSON at byte {offset}: {message}")]
    JsonSyntax { offset: usize, message: String },
    #[error("output does not match the process schema: {0}")]
    SchemaViolation(ValidationReport),
}

/// The JSON text chosen from the model output and where it starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate<'a> {
    pub text: &'a str,
    pub offset: usize,
}

struct Fence<'a> {
    label: &'a str,
    body: Candidate<'a>,
}

fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = text[pos..].find("```") {
        let open = pos + rel + 3;
        let rest = &text[open..];
        let line_end = rest.find('\n');
        let close = rest.find("```");
        let label_line = &rest[..line_end.unwrap_or(rest.len())];
        let labelled = line_end.is_some_and(|nl| close.is_none_or(|c| nl < c))
            && label_line
                .trim()
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "_+-.".contains(c));
        let (label, body_start) = if labelled {
            (label_line.trim(), open + line_end.unwrap() + 1)
        } else {
            ("", open)
        };
        let body_end = text[body_start..]
            .find("```")
            .map_or(text.len(), |c| body_start + c);
        out.push(Fence {
            label,
            body: Candidate {
                text: &text[body_start..body_end],
                offset: body_start,
            },
        });
        if body_end == text.len() {
            break;
        }
        pos = body_end + 3;
    }
    out
}

/// The first top-level `[...]`, skipping brackets inside JSON strings. An
/// unclosed array runs to the end of the text.
fn bracketed(text: &str) -> Option<Candidate<'_>> {
    let start = text.find('[')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(Candidate {
                        text: &text[start..=start + i],
                        offset: start,
                    });
                }
            }
            _ => {}
        }
    }
    Some(Candidate {
        text: &text[start..],
        offset: start,
    })
}

/// Picks the JSON candidate: a ```json fence, else any fence, else the
/// first bracketed array.
pub fn select_candidate(text: &str) -> Option<Candidate<'_>> {
    let fences = fences(text);
    fences
        .iter()
        .find(|f| f.label.eq_ignore_ascii_case("json"))
        .or_else(|| fences.first())
        .map(|f| f.body)
        .filter(|c| !c.text.trim().is_empty())
        .or_else(|| bracketed(text))
}

/// Extracts and syntax-checks a JSON array from model output.
pub(crate) fn parse_json_array(raw: &str) -> Result<Vec<Value>, ParseFailure> {
    let candidate = select_candidate(raw).ok_or(ParseFailure::NoJsonFound)?;
    let lead = candidate.text.len() - candidate.text.trim_start().len();
    let body = candidate.text.trim();
    let value: Value = serde_json::from_str(body).map_err(|e| ParseFailure::JsonSyntax {
        offset: candidate.offset + lead + snapshot_byte_offset(body, e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value {
        Value::Array(items) => Ok(items),
        other => Err(ParseFailure::SchemaViolation(ValidationReport::from_violations(vec![
            Violation::new(
                "",
                ViolationCode::Invalid,
                format!("expected a JSON array, found {}", kind(&other)),
            ),
        ]))),
    }
}

/// Parses model output into communication processes. Structure is checked
/// here; metric ranges are left to [`crate::ontology::validate_processes`].
pub fn parse_generation(raw: &str) -> Result<Vec<CommunicationProcess>, ParseFailure> {
    let items = parse_json_array(raw)?;
    let mut violations = Vec::new();
    if items.is_empty() {
        violations.push(Violation::new(
            "processes",
            ViolationCode::Missing,
            "the array holds no communication process",
        ));
    }
    let processes: Vec<_> = items
        .iter()
        .enumerate()
        .filter_map(|(i, item)| process_from_value(item, i, &format!("processes[{i}]"), &mut violations))
        .collect();
    if violations.is_empty() {
        Ok(processes)
    } else {
        Err(ParseFailure::SchemaViolation(ValidationReport::from_violations(violations)))
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn path(prefix: &str, field: &str) -> String {
    format!("{prefix}.{field}")
}

pub(crate) fn required_string(
    map: &Map<String, Value>,
    prefix: &str,
    field: &str,
    out: &mut Vec<Violation>,
) -> Option<String> {
    match map.get(field) {
        Some(Value::String(s)) => Some(s.clone()),
        None | Some(Value::Null) => {
            out.push(Violation::new(path(prefix, field), ViolationCode::Missing, "required"));
            None
        }
        Some(other) => {
            out.push(Violation::new(
                path(prefix, field),
                ViolationCode::Invalid,
                format!("expected a string, found {}", kind(other)),
            ));
            None
        }
    }
}

pub(crate) fn reject_unknown(
    map: &Map<String, Value>,
    known: &[&str],
    prefix: &str,
    out: &mut Vec<Violation>,
) {
    for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
        out.push(Violation::new(path(prefix, key), ViolationCode::Unknown, "unknown field"));
    }
}

const PROCESS_FIELDS: [&str; 7] = [
    "id",
    "name",
    "description",
    "is_real_time",
    "direction",
    "message_type",
    "specification",
];

/// Builds one process from a JSON value, pushing every problem found. The
/// id is derived from the element's content and position when absent.
pub(crate) fn process_from_value(
    item: &Value,
    index: usize,
    prefix: &str,
    out: &mut Vec<Violation>,
) -> Option<CommunicationProcess> {
    let Value::Object(map) = item else {
        out.push(Violation::new(
            prefix,
            ViolationCode::Invalid,
            format!("expected an object, found {}", kind(item)),
        ));
        return None;
    };
    let before = out.len();
    reject_unknown(map, &PROCESS_FIELDS, prefix, out);

    let id = match map.get("id") {
        None | Some(Value::Null) => Some(Uuid::new_v5(
            &PROCESS_NAMESPACE,
            format!("{index}:{item}").as_bytes(),
        )),
        Some(Value::String(s)) => match Uuid::parse_str(s) {
            Ok(id) => Some(id),
            Err(e) => {
                out.push(Violation::new(path(prefix, "id"), ViolationCode::Invalid, e.to_string()));
                None
            }
        },
        Some(other) => {
            out.push(Violation::new(
                path(prefix, "id"),
                ViolationCode::Invalid,
                format!("expected a UUID string, found {}", kind(other)),
            ));
            None
        }
    };
    let name = required_string(map, prefix, "name", out);
    let description = required_string(map, prefix, "description", out);
    let message_type = required_string(map, prefix, "message_type", out);

    let is_real_time = match map.get("is_real_time") {
        Some(Value::Bool(b)) => Some(*b),
        None | Some(Value::Null) => {
            out.push(Violation::new(path(prefix, "is_real_time"), ViolationCode::Missing, "required"));
            None
        }
        Some(other) => {
            out.push(Violation::new(
                path(prefix, "is_real_time"),
                ViolationCode::Invalid,
                format!("expected a boolean, found {}", kind(other)),
            ));
            None
        }
    };

    let direction = match required_string(map, prefix, "direction", out) {
        Some(s) => match s.trim().to_ascii_lowercase().as_str() {
            "transmit" => Some(Direction::Transmit),
            "receive" => Some(Direction::Receive),
            _ => {
                out.push(Violation::new(
                    path(prefix, "direction"),
                    ViolationCode::Invalid,
                    format!("expected \"transmit\" or \"receive\", found {s:?}"),
                ));
                None
            }
        },
        None => None,
    };

    let spec_prefix = path(prefix, "specification");
    let specification = match map.get("specification") {
        Some(Value::Object(spec)) => Some(spec_from_map(spec, &spec_prefix, out)),
        None | Some(Value::Null) => {
            out.push(Violation::new(&spec_prefix, ViolationCode::Missing, "required"));
            None
        }
        Some(other) => {
            out.push(Violation::new(
                &spec_prefix,
                ViolationCode::Invalid,
                format!("expected an object, found {}", kind(other)),
            ));
            None
        }
    };

    if out.len() != before {
        return None;
    }
    Some(CommunicationProcess {
        id: id?,
        name: name?,
        description: description?,
        is_real_time: is_real_time?,
        direction: direction?,
        message_type: message_type?,
        specification: specification?,
    })
}

/// Numbers pass through, numeric strings are coerced, null means absent.
fn spec_from_map(map: &Map<String, Value>, prefix: &str, out: &mut Vec<Violation>) -> NetworkSpecification {
    let mut spec = NetworkSpecification::default();
    for (key, value) in map {
        let metric = if key == "mobility_kmps" {
            tracing::warn!("`mobility_kmps` is deprecated, use `mobility_kmph`");
            Some(Metric::Mobility)
        } else {
            Metric::from_field_name(key)
        };
        let Some(metric) = metric else {
            out.push(Violation::new(path(prefix, key), ViolationCode::Unknown, "unknown metric"));
            continue;
        };
        let number = match value {
            Value::Null => continue,
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
            _ => None,
        };
        match number {
            Some(v) => spec.set(metric, Some(v)),
            None => out.push(Violation::new(
                path(prefix, metric.field_name()),
                ViolationCode::Invalid,
                format!("expected a number, found {value}"),
            )),
        }
    }
    spec
}
