//! Schema-driven dataset metadata extraction.
//!
//! This crate holds everything that does not touch the outside world: the
//! attribute schema model, output repair and validation, prompt assembly,
//! the extraction strategies, browsing plans, and scoring. IO lives in the
//! `mole` crate, which plugs concrete HTTP transports and file access into
//! the traits defined here ([`gateway::ChatBackend`], [`browse::Fetcher`]).

#![no_std]

extern crate alloc;

pub mod browse;
pub mod document;
pub mod eval;
pub mod extract;
pub mod gateway;
pub mod prompt;
pub mod repair;
pub mod schema;
pub mod similarity;
pub mod validate;
pub mod value;

pub use document::{Document, SourceFormat};
pub use schema::{AnswerType, AttributeSpec, Category, LengthProfile, ProfileLevel, Schema};
pub use validate::{MetadataRecord, ValidationLog};
pub use value::AnswerValue;

pub(crate) fn casefold(s: &str) -> alloc::string::String {
    s.trim().to_lowercase()
}

pub(crate) fn is_integral(x: f64) -> bool {
    x.is_finite() && libm::trunc(x) == x
}
