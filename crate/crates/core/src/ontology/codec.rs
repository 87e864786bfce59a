//! Canonical JSON encoding of use cases.

use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use super::model::UseCase;

/// A decode failure, annotated with the JSON path where it happened.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{}: {message}", if path.is_empty() { "<root>" } else { path.as_str() })]
pub struct ParseError {
    pub path: String,
    pub message: String,
    /// 1-based position for syntax errors.
    pub line: Option<usize>,
    pub column: Option<usize>,
}

pub fn serialize_use_case(uc: &UseCase) -> String {
    serde_json::to_string_pretty(uc).expect("use case serialization is infallible")
}

pub fn parse_use_case(text: &str) -> Result<UseCase, ParseError> {
    parse_document(text)
}

/// Parses a JSON array of use cases, reporting paths such as `[3].name`.
pub fn parse_use_cases(text: &str) -> Result<Vec<UseCase>, ParseError> {
    parse_document(text)
}

pub(crate) fn parse_document<T: DeserializeOwned>(text: &str) -> Result<T, ParseError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ParseError {
        path: String::new(),
        message: e.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
    })?;
    rewrite_legacy_names(&mut value);
    from_value(value)
}

/// Typed decode of an already-parsed value with path-annotated errors.
pub(crate) fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, ParseError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        if path == "." {
            path.clear();
        }
        let message = e.inner().to_string();
        // Missing-field errors are reported at the containing object; point
        // at the field itself.
        if let Some(field) = backticked(&message, "missing field `") {
            path = if path.is_empty() {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
        ParseError {
            path,
            message,
            line: None,
            column: None,
        }
    })
}

fn backticked<'a>(message: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = message.strip_prefix(prefix)?;
    rest.split('`').next()
}

/// Renames `mobility_kmps` to `mobility_kmph` wherever it appears as an
/// object key, logging a deprecation warning.
pub(crate) fn rewrite_legacy_names(value: &mut Value) {
    match value {
        Value::Object(map) => {
            if let Some(v) = map.remove("mobility_kmps") {
                tracing::warn!("`mobility_kmps` is deprecated; reading it as `mobility_kmph` (km/h)");
                map.entry("mobility_kmph").or_insert(v);
            }
            map.values_mut().for_each(rewrite_legacy_names);
        }
        Value::Array(items) => items.iter_mut().for_each(rewrite_legacy_names),
        _ => {}
    }
}
