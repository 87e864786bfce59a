//! The use-case data model: use cases, their communication processes, the
//! eight network specification metrics and the operator-configurable ranges
//! that bound them.
//!
//! All types here are plain immutable values. Validation is total: bad input
//! produces a [`ValidationReport`], never an error.

mod codec;
mod model;
mod ranges;
mod spec;
mod validate;

pub use codec::{parse_use_case, parse_use_cases, serialize_use_case, ParseError};
pub use model::{
    embedded_text, CommunicationProcess, Direction, Provenance, UseCase, UseCaseStatus,
    MAX_DESCRIPTION_CHARS, MAX_NAME_CHARS,
};
pub use ranges::{imt2030, MetricRange, RangeError, SpecRangeConfig, POSITIVE_FLOOR};
pub use spec::{Better, Domain, Metric, NetworkSpecification};
pub use validate::{
    validate_processes, validate_spec, validate_use_case, ValidationReport, Violation,
    ViolationCode,
};
