//! Paper text and context truncation.

use alloc::string::String;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceFormat {
    Latex,
    PlainText,
}

impl SourceFormat {
    pub fn name(self) -> &'static str {
        match self {
            SourceFormat::Latex => "latex",
            SourceFormat::PlainText => "plain_text",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocumentError {
    #[error("context fraction {0} is outside (0, 1]")]
    Fraction(f64),
}

/// Normalized paper text. `char_count` is kept in sync with `text`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source_format: SourceFormat,
    text: String,
    char_count: usize,
    pub publication_year: Option<i32>,
}

impl Document {
    /// Builds a document, normalizing line endings to `\n` and removing NULs.
    pub fn new(id: impl Into<String>, source_format: SourceFormat, text: &str) -> Self {
        let text = normalize_text(text);
        let char_count = text.chars().count();
        Document {
            id: id.into(),
            source_format,
            text,
            char_count,
            publication_year: None,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn char_count(&self) -> usize {
        self.char_count
    }
}

pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\0' => {}
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    chars.next();
                }
                out.push('\n');
            }
            c => out.push(c),
        }
    }
    out
}

/// Number of characters kept for `fraction` of `total`: `ceil(fraction * total)`.
pub fn prefix_len(total: usize, fraction: f64) -> Result<usize, DocumentError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DocumentError::Fraction(fraction));
    }
    let x = fraction * total as f64;
    // Absorb representation error so that 0.07 * 100 keeps 7, not 8.
    let r = libm::round(x);
    let keep = if libm::fabs(x - r) <= 1e-9 * x.max(1.0) { r } else { libm::ceil(x) };
    Ok((keep as usize).min(total))
}

/// Keeps the first `ceil(fraction * char_count)` characters.
pub fn truncate_context(doc: &Document, fraction: f64) -> Result<Document, DocumentError> {
    let keep = prefix_len(doc.char_count, fraction)?;
    if keep == doc.char_count {
        return Ok(doc.clone());
    }
    let end = doc
        .text
        .char_indices()
        .nth(keep)
        .map_or(doc.text.len(), |(i, _)| i);
    Ok(Document {
        id: doc.id.clone(),
        source_format: doc.source_format,
        text: String::from(&doc.text[..end]),
        char_count: keep,
        publication_year: doc.publication_year,
    })
}
