//! 6G use-case knowledge base with retrieval-augmented generation of
//! network requirement specifications.

pub mod ontology;
pub mod providers;
pub mod store;
pub mod rag;
pub mod community;
pub mod service;
pub mod cli;
