//! Extraction strategies: LLM-backed, random baseline and keyword baseline.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::document::{truncate_context, Document, DocumentError};
use crate::gateway::{ChatBackend, GatewayError, Gateway, ModelConfig, Sleep, UsageSink};
use crate::prompt::{build_extraction_request, MessageSequence, SyntheticExample};
use crate::repair::repair_json;
use crate::schema::{AnswerType, OptionLiteral, Schema};
use crate::validate::{validate_record, MetadataRecord, ValidationLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Llm,
    Random,
    Keyword,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Llm => "llm",
            Strategy::Random => "random",
            Strategy::Keyword => "keyword",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Strategy::Llm, Strategy::Random, Strategy::Keyword]
            .into_iter()
            .find(|x| x.name() == s)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionRun {
    pub document_id: String,
    pub strategy: Strategy,
    pub model_id: Option<String>,
    pub shots: usize,
    pub fraction: f64,
    pub record: MetadataRecord,
    pub log: ValidationLog,
    pub attempts_used: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Set by the caller; this crate has no clock.
    pub timestamp: Option<String>,
    pub warnings: Vec<String>,
}

impl ExtractionRun {
    fn baseline(document_id: &str, strategy: Strategy, record: MetadataRecord, log: ValidationLog) -> Self {
        ExtractionRun {
            document_id: document_id.to_owned(),
            strategy,
            model_id: None,
            shots: 0,
            fraction: 1.0,
            record,
            log,
            attempts_used: 0,
            input_tokens: 0,
            output_tokens: 0,
            timestamp: None,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Success predicate for model output: it must repair into a JSON object.
/// `validate_record` is total, so nothing else can fail downstream.
pub fn accept_output(content: &str) -> Result<(), String> {
    repair_json(content).map(|_| ()).map_err(|e| e.to_string())
}

/// Sends `messages` and validates the reply into a record.
pub fn complete_record<B: ChatBackend, S: Sleep, U: UsageSink>(
    gateway: &Gateway<B, S, U>,
    messages: &MessageSequence,
    schema: &Schema,
    cfg: &ModelConfig,
) -> Result<(MetadataRecord, ValidationLog, crate::gateway::CompletionResult), GatewayError> {
    let result = gateway.complete_with_retry(messages, cfg, accept_output)?;
    let raw = repair_json(&result.content).expect("accepted output repairs");
    let (record, log) = validate_record(&raw, schema);
    Ok((record, log, result))
}

pub fn extract_llm<B: ChatBackend, S: Sleep, U: UsageSink>(
    gateway: &Gateway<B, S, U>,
    doc: &Document,
    schema: &Schema,
    cfg: &ModelConfig,
    shots: &[SyntheticExample],
    fraction: f64,
) -> Result<ExtractionRun, ExtractError> {
    let context = truncate_context(doc, fraction)?;
    let messages = build_extraction_request(schema, &context, shots);
    let (record, log, result) = complete_record(gateway, &messages, schema, cfg)?;
    Ok(ExtractionRun {
        document_id: doc.id.clone(),
        strategy: Strategy::Llm,
        model_id: Some(cfg.model_id.clone()),
        shots: shots.len(),
        fraction,
        record,
        log,
        attempts_used: result.attempts_used,
        input_tokens: result.input_tokens,
        output_tokens: result.output_tokens,
        timestamp: None,
        warnings: Vec::new(),
    })
}

/// Uniform choice among each attribute's options; everything else defaulted.
pub fn extract_random(document_id: &str, schema: &Schema, seed: u64) -> ExtractionRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Map::new();
    for spec in &schema.attributes {
        let Some(options) = &spec.options else { continue };
        let value = match &spec.answer_type {
            AnswerType::Flag => {
                let flags: Vec<bool> = options
                    .iter()
                    .filter_map(|o| match o {
                        OptionLiteral::Bool(b) => Some(*b),
                        OptionLiteral::Text(_) => None,
                    })
                    .collect();
                match flags.choose(&mut rng) {
                    Some(b) => Value::Bool(*b),
                    None => continue,
                }
            }
            AnswerType::TextList => {
                let opts = spec.text_options();
                let hi = spec.answer_max.map_or(opts.len(), |m| (m as usize).min(opts.len()));
                let lo = (spec.answer_min.max(1) as usize).min(hi);
                if hi == 0 {
                    continue;
                }
                let k = rng.random_range(lo..=hi);
                let picked = rand::seq::index::sample(&mut rng, opts.len(), k);
                Value::Array(picked.into_iter().map(|i| Value::String(opts[i].to_owned())).collect())
            }
            AnswerType::Text => match spec.text_options().choose(&mut rng) {
                Some(o) => Value::String((*o).to_owned()),
                None => continue,
            },
            _ => continue,
        };
        raw.insert(spec.name.clone(), value);
    }
    let (record, log) = validate_record(&raw, schema);
    ExtractionRun::baseline(document_id, Strategy::Random, record, log)
}

/// Literal-occurrence heuristics over the paper text; no model involved.
pub fn extract_keyword(doc: &Document, schema: &Schema) -> ExtractionRun {
    let text = doc.text();
    let folded = text.to_lowercase();
    let mut raw = Map::new();
    let unit_hit = schema
        .get("Unit")
        .and_then(|u| largest_number_near(&folded, &u.text_options()));
    for spec in &schema.attributes {
        let value = match &spec.answer_type {
            AnswerType::Url => {
                let want_hf = spec.name.contains("HF");
                find_urls(text)
                    .into_iter()
                    .find(|u| !want_hf || u.contains("huggingface.co"))
                    .map(|u| Value::String(u.to_owned()))
            }
            AnswerType::Year => most_frequent_year(text).map(Value::from),
            AnswerType::Number => unit_hit.as_ref().map(|(n, _)| Value::from(*n)),
            AnswerType::Text if spec.name == "Unit" && unit_hit.is_some() => {
                unit_hit.as_ref().map(|(_, u)| Value::String(u.clone()))
            }
            AnswerType::Text | AnswerType::TextList if spec.options.is_some() => {
                earliest_option(&folded, &spec.text_options()).map(|o| {
                    let s = Value::String(o.to_owned());
                    if spec.answer_type.is_list() {
                        Value::Array(alloc::vec![s])
                    } else {
                        s
                    }
                })
            }
            _ => None,
        };
        if let Some(v) = value {
            raw.insert(spec.name.clone(), v);
        }
    }
    let (record, log) = validate_record(&raw, schema);
    ExtractionRun::baseline(&doc.id, Strategy::Keyword, record, log)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offset of the first whole-word occurrence of `needle` in `hay`.
fn find_word(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let mut from = 0;
    while let Some(i) = hay[from..].find(needle) {
        let start = from + i;
        let end = start + needle.len();
        let before = hay[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before && after {
            return Some(start);
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

fn earliest_option<'a>(folded: &str, options: &[&'a str]) -> Option<&'a str> {
    let mut best: Option<(usize, &str)> = None;
    for o in options {
        if let Some(pos) = find_word(folded, &o.trim().to_lowercase()) {
            if best.is_none_or(|(b, _)| pos < b) {
                best = Some((pos, o));
            }
        }
    }
    best.map(|(_, o)| o)
}

pub(crate) fn find_urls(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(i) = text[from..].find("http") {
        let start = from + i;
        let rest = &text[start..];
        if rest.starts_with("http://") || rest.starts_with("https://") {
            let len = rest
                .find(|c: char| c.is_whitespace() || matches!(c, '"' | '<' | '>' | '}' | '{' | '\\' | '`'))
                .unwrap_or(rest.len());
            let url = rest[..len].trim_end_matches(['.', ',', ';', ':', ')', ']', '\'']);
            if url.len() > "https://".len() {
                out.push(url);
            }
            from = start + len.max(1);
        } else {
            from = start + 4;
        }
    }
    out
}

fn most_frequent_year(text: &str) -> Option<i32> {
    let mut counts: Vec<(i32, usize)> = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 4 {
                let y: i32 = text[start..i].parse().expect("four ascii digits");
                if (1900..=2100).contains(&y) {
                    match counts.iter_mut().find(|(v, _)| *v == y) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((y, 1)),
                    }
                }
            }
        } else {
            i += 1;
        }
    }
    let mut best: Option<(i32, usize)> = None;
    for (y, c) in counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((y, c));
        }
    }
    best.map(|(y, _)| y)
}

fn parse_number(word: &str) -> Option<f64> {
    let w = word.trim_matches(|c: char| !c.is_ascii_digit());
    if w.is_empty() || !w.bytes().all(|b| b.is_ascii_digit() || b == b',' || b == b'.') {
        return None;
    }
    let cleaned: String = w.chars().filter(|c| *c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|n| n.is_finite())
}

/// Largest number within three words of a unit word, with that unit.
fn largest_number_near(folded: &str, units: &[&str]) -> Option<(f64, String)> {
    let words: Vec<&str> = folded.split_whitespace().collect();
    let bare = |w: &str| w.trim_matches(|c: char| !is_word_char(c)).to_string();
    let mut best: Option<(f64, String)> = None;
    for (i, w) in words.iter().enumerate() {
        let Some(n) = parse_number(w) else { continue };
        let lo = i.saturating_sub(3);
        let hi = (i + 3).min(words.len() - 1);
        let unit = (lo..=hi)
            .filter(|&j| j != i)
            .filter_map(|j| {
                let w = bare(words[j]);
                units.iter().find(|u| u.to_lowercase() == w).map(|u| (j.abs_diff(i), *u))
            })
            .min_by_key(|(d, _)| *d)
            .map(|(_, u)| u);
        if let Some(u) = unit {
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, u.to_owned()));
            }
        }
    }
    best
}
