//! Type, option and length validation of repaired model output.
//!
//! [`validate_record`] is total: whatever the model produced, the result has
//! exactly one well-typed value per schema attribute. Every correction is
//! written to the [`ValidationLog`].

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::{casefold, is_integral};
use crate::schema::{default_answer, AnswerType, AttributeSpec, Category, Schema};
use crate::similarity::{best_match, NormalizedLevenshtein, Similarity};
use crate::value::{AnswerValue, KeyedRow, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Cast,
    OptionMatched,
    Defaulted,
    LengthViolation,
    KeyDropped,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Cast => "cast",
            Action::OptionMatched => "option_matched",
            Action::Defaulted => "defaulted",
            Action::LengthViolation => "length_violation",
            Action::KeyDropped => "key_dropped",
        }
    }

    /// Whether the action changed the answer. Length violations are only
    /// reported; the answer is kept as the model wrote it.
    pub fn is_corrective(self) -> bool {
        self != Action::LengthViolation
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub attribute: String,
    pub action: Action,
    pub detail: String,
}

/// Append-only audit trail, one entry per corrective action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ValidationLog {
    entries: Vec<LogEntry>,
}

impl ValidationLog {
    pub fn push(&mut self, attribute: &str, action: Action, detail: impl Into<String>) {
        self.entries.push(LogEntry {
            attribute: attribute.to_owned(),
            action,
            detail: detail.into(),
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, action: Action) -> usize {
        self.entries.iter().filter(|e| e.action == action).count()
    }

    /// True when no entry altered the answer (length reports allowed).
    pub fn is_clean(&self) -> bool {
        !self.entries.iter().any(|e| e.action.is_corrective())
    }

    pub fn extend(&mut self, other: ValidationLog) {
        self.entries.extend(other.entries);
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("record JSON is malformed: {0}")]
    Json(String),
    #[error("record is missing attribute `{0}`")]
    Missing(String),
    #[error("record value for `{attribute}` is not a valid `{expected}`")]
    WrongType { attribute: String, expected: String },
    #[error("record has attribute `{0}` that is not in the schema")]
    Unknown(String),
}

/// One validated answer per schema attribute, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataRecord {
    pub category: Category,
    values: Vec<(String, AnswerValue)>,
}

impl MetadataRecord {
    /// Record holding the default answer for every attribute.
    pub fn defaults(schema: &Schema) -> Self {
        MetadataRecord {
            category: schema.category,
            values: schema
                .attributes
                .iter()
                .map(|a| (a.name.clone(), default_answer(a)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&AnswerValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Replaces an existing attribute's value; returns false for unknown names.
    pub fn set(&mut self, name: &str, value: AnswerValue) -> bool {
        match self.values.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => {
                slot.1 = value;
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AnswerValue)> {
        self.values.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete_for(&self, schema: &Schema) -> bool {
        self.values.len() == schema.len()
            && schema
                .attributes
                .iter()
                .zip(&self.values)
                .all(|(a, (n, v))| a.name == *n && v.has_type(&a.answer_type))
    }

    pub fn to_json_object(&self) -> Map<String, Value> {
        self.values
            .iter()
            .map(|(n, v)| (n.clone(), v.to_json()))
            .collect()
    }

    /// Pretty JSON, attributes in schema order.
    pub fn to_json_string(&self) -> String {
        let pretty = serde_json::to_string_pretty(self).expect("record serialization is infallible");
        reindent(&pretty)
    }

    /// Reads a record file strictly: every attribute present, correctly typed.
    pub fn from_json_str(raw: &str, schema: &Schema) -> Result<Self, RecordError> {
        let value: Value = serde_json::from_str(raw).map_err(|e| RecordError::Json(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| RecordError::Json("expected a JSON object".into()))?;
        Self::from_json_object(obj, schema)
    }

    pub fn from_json_object(obj: &Map<String, Value>, schema: &Schema) -> Result<Self, RecordError> {
        if let Some(unknown) = obj.keys().find(|k| schema.get(k).is_none()) {
            return Err(RecordError::Unknown(unknown.clone()));
        }
        let mut values = Vec::with_capacity(schema.len());
        for a in &schema.attributes {
            let raw = obj
                .get(&a.name)
                .ok_or_else(|| RecordError::Missing(a.name.clone()))?;
            let v = AnswerValue::from_typed_json(raw, &a.answer_type).ok_or_else(|| {
                RecordError::WrongType {
                    attribute: a.name.clone(),
                    expected: a.answer_type.literal(),
                }
            })?;
            values.push((a.name.clone(), v));
        }
        Ok(MetadataRecord {
            category: schema.category,
            values,
        })
    }
}

impl Serialize for MetadataRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (n, v) in &self.values {
            map.serialize_entry(n, v)?;
        }
        map.end()
    }
}

pub type Actions = Vec<(Action, String)>;

fn render_number(n: f64) -> String {
    if is_integral(n) && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => n.as_f64().map(render_number),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',' && *c != '_')
        .collect();
    cleaned.parse::<f64>().ok().filter(|n| n.is_finite())
}

fn valid_year(y: i64) -> Option<i32> {
    (y == 0 || (1900..=2100).contains(&y)).then_some(y as i32)
}

fn year_in_text(s: &str) -> Option<i32> {
    let t = s.trim();
    if let Ok(y) = t.parse::<i64>() {
        return valid_year(y);
    }
    let chars: Vec<char> = t.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 4 {
                let n: String = chars[start..i].iter().collect();
                if let Some(y) = n.parse::<i64>().ok().and_then(valid_year) {
                    if y != 0 {
                        return Some(y);
                    }
                }
            }
        } else {
            i += 1;
        }
    }
    None
}

/// True for `scheme://host...` with an alphabetic scheme and a non-empty host.
/// Doubles the 2-space indentation produced by `to_string_pretty`. JSON
/// strings never contain raw newlines, so leading spaces are always indent.
pub(crate) fn reindent(pretty: &str) -> String {
    let mut out = String::with_capacity(pretty.len() * 2);
    for (i, line) in pretty.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let body = line.trim_start_matches(' ');
        for _ in 0..(line.len() - body.len()) * 2 {
            out.push(' ');
        }
        out.push_str(body);
    }
    out
}

pub fn is_well_formed_url(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once("://") else {
        return false;
    };
    let host = rest.split(['/', '?', '#']).next().unwrap_or("");
    !scheme.is_empty()
        && scheme.chars().all(|c| c.is_ascii_alphabetic())
        && !host.is_empty()
        && !s.chars().any(char::is_whitespace)
}

fn coerce_url(s: &str, actions: &mut Actions) -> Option<String> {
    if s.is_empty() || is_well_formed_url(s) {
        return Some(s.to_owned());
    }
    let t = s.trim();
    if is_well_formed_url(t) {
        actions.push((Action::Cast, "trimmed url".into()));
        return Some(t.to_owned());
    }
    let host = t.split('/').next().unwrap_or("");
    if host.contains('.') && !t.contains(char::is_whitespace) && !t.contains("://") {
        let fixed = format!("https://{t}");
        if is_well_formed_url(&fixed) {
            actions.push((Action::Cast, "added https scheme".into()));
            return Some(fixed);
        }
    }
    None
}

/// Casts a raw JSON value to the attribute's answer type, falling back to
/// the default answer when no sensible cast exists.
pub fn coerce_type(v: &Value, spec: &AttributeSpec) -> (AnswerValue, Actions) {
    let mut actions = Actions::new();
    let cast = |actions: &mut Actions, from: &str| {
        actions.push((Action::Cast, format!("{from} -> {}", spec.answer_type.literal())))
    };
    let kind = |v: &Value| match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "list",
        Value::Object(_) => "object",
    };
    let value = match (&spec.answer_type, v) {
        (AnswerType::Text, Value::String(s)) => Some(AnswerValue::Text(s.clone())),
        (AnswerType::Text, Value::Number(_) | Value::Bool(_)) => {
            cast(&mut actions, kind(v));
            scalar_text(v).map(AnswerValue::Text)
        }
        (AnswerType::Text, Value::Array(items)) => items
            .iter()
            .map(scalar_text)
            .collect::<Option<Vec<_>>>()
            .map(|parts| {
                cast(&mut actions, "list");
                AnswerValue::Text(parts.join(", "))
            }),

        (AnswerType::Url, Value::String(s)) => coerce_url(s, &mut actions).map(AnswerValue::Url),
        (AnswerType::Url, Value::Array(items)) if items.len() == 1 && items[0].is_string() => {
            cast(&mut actions, "list");
            coerce_url(items[0].as_str().unwrap_or(""), &mut actions).map(AnswerValue::Url)
        }

        (AnswerType::Year, Value::Number(n)) => match n.as_i64() {
            Some(y) => valid_year(y).map(AnswerValue::Year),
            None => n
                .as_f64()
                .filter(|f| is_integral(*f) && f.abs() < 1e6)
                .and_then(|f| valid_year(f as i64))
                .map(|y| {
                    cast(&mut actions, "number");
                    AnswerValue::Year(y)
                }),
        },
        (AnswerType::Year, Value::String(s)) => year_in_text(s).map(|y| {
            cast(&mut actions, "string");
            AnswerValue::Year(y)
        }),

        (AnswerType::Number, Value::Number(n)) => n.as_f64().map(AnswerValue::Number),
        (AnswerType::Number, Value::String(s)) => parse_number(s).map(|n| {
            cast(&mut actions, "string");
            AnswerValue::Number(n)
        }),

        (AnswerType::Flag, Value::Bool(b)) => Some(AnswerValue::Flag(*b)),
        (AnswerType::Flag, Value::String(s)) => {
            let t = s.trim();
            let b = if t.eq_ignore_ascii_case("true") {
                Some(true)
            } else if t.eq_ignore_ascii_case("false") {
                Some(false)
            } else {
                None
            };
            b.map(|b| {
                cast(&mut actions, "string");
                AnswerValue::Flag(b)
            })
        }

        (AnswerType::TextList, Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::String(s) if !s.trim().is_empty() => out.push(s.clone()),
                    Value::Number(_) | Value::Bool(_) => {
                        cast(&mut actions, kind(item));
                        out.extend(scalar_text(item));
                    }
                    other => actions.push((Action::Cast, format!("dropped {} element", kind(other)))),
                }
            }
            Some(AnswerValue::TextList(out))
        }
        (AnswerType::TextList, Value::String(s)) => {
            cast(&mut actions, "string");
            let items = if s.trim().is_empty() { Vec::new() } else { alloc::vec![s.clone()] };
            Some(AnswerValue::TextList(items))
        }
        (AnswerType::TextList, Value::Number(_) | Value::Bool(_)) => {
            cast(&mut actions, kind(v));
            scalar_text(v).map(|s| AnswerValue::TextList(alloc::vec![s]))
        }

        (AnswerType::KeyedRecordList(_), Value::Array(items)) => {
            let mut rows = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Object(obj) => rows.push(raw_row(obj, &mut actions)),
                    other => actions.push((Action::Cast, format!("dropped {} element", kind(other)))),
                }
            }
            Some(AnswerValue::KeyedRecordList(rows))
        }
        (AnswerType::KeyedRecordList(_), Value::Object(obj)) => {
            cast(&mut actions, "object");
            Some(AnswerValue::KeyedRecordList(alloc::vec![raw_row(obj, &mut actions)]))
        }
        _ => None,
    };
    match value {
        Some(v) => (v, actions),
        None => {
            actions.push((Action::Defaulted, format!("cannot cast {} to {}", kind(v), spec.answer_type.literal())));
            (default_answer(spec), actions)
        }
    }
}

fn raw_row(obj: &Map<String, Value>, actions: &mut Actions) -> KeyedRow {
    let mut row = KeyedRow::default();
    for (k, v) in obj {
        match v {
            Value::Null => {}
            Value::Array(items) => match items.iter().map(scalar_text).collect::<Option<Vec<_>>>() {
                Some(parts) => {
                    actions.push((Action::Cast, format!("key `{k}`: list -> text")));
                    row.0.push((k.clone(), Scalar::Text(parts.join(", "))));
                }
                None => actions.push((Action::Cast, format!("key `{k}`: dropped nested value"))),
            },
            Value::Object(_) => actions.push((Action::Cast, format!("key `{k}`: dropped nested value"))),
            scalar => row.0.extend(Scalar::from_json(scalar).map(|s| (k.clone(), s))),
        }
    }
    row
}

/// Snaps `v` onto the closest text option. Exact matches ignore case and
/// surrounding whitespace; otherwise the option with the highest similarity
/// wins, ties going to the earliest option.
pub fn match_option(v: &str, spec: &AttributeSpec) -> (String, Actions) {
    match_option_with(&NormalizedLevenshtein, v, spec)
}

pub fn match_option_with<S: Similarity + ?Sized>(sim: &S, v: &str, spec: &AttributeSpec) -> (String, Actions) {
    let options = spec.text_options();
    if options.is_empty() {
        return (v.to_owned(), Actions::new());
    }
    choose_option(sim, v, &options)
}

fn choose_option<S: Similarity + ?Sized>(sim: &S, v: &str, options: &[&str]) -> (String, Actions) {
    let folded = casefold(v);
    let chosen = match options.iter().find(|o| casefold(o) == folded) {
        Some(o) => *o,
        None => {
            let folded_opts: Vec<String> = options.iter().map(|o| casefold(o)).collect();
            let refs: Vec<&str> = folded_opts.iter().map(String::as_str).collect();
            let i = best_match(sim, &folded, &refs).expect("options are non-empty");
            options[i]
        }
    };
    let mut actions = Actions::new();
    if chosen != v {
        actions.push((Action::OptionMatched, format!("{v:?} -> {chosen:?}")));
    }
    (chosen.to_owned(), actions)
}

/// Validates a repaired JSON object against the schema with the default
/// similarity function.
pub fn validate_record(raw: &Map<String, Value>, schema: &Schema) -> (MetadataRecord, ValidationLog) {
    validate_record_with(&NormalizedLevenshtein, raw, schema)
}

pub fn validate_record_with<S: Similarity + ?Sized>(
    sim: &S,
    raw: &Map<String, Value>,
    schema: &Schema,
) -> (MetadataRecord, ValidationLog) {
    let mut log = ValidationLog::default();
    let mut values = Vec::with_capacity(schema.len());
    for spec in &schema.attributes {
        let name = spec.name.as_str();
        let value = match raw.get(name) {
            None | Some(Value::Null) => {
                let why = if raw.contains_key(name) { "null answer" } else { "missing answer" };
                log.push(name, Action::Defaulted, why);
                default_answer(spec)
            }
            Some(v) => {
                let (mut value, actions) = coerce_type(v, spec);
                for (a, d) in actions {
                    log.push(name, a, d);
                }
                apply_options(sim, &mut value, spec, schema, &mut log);
                value
            }
        };
        let len = spec.answer_length(&value);
        if !spec.length_in_bounds(len) {
            let max = spec.answer_max.map_or_else(|| "inf".to_string(), |m| m.to_string());
            log.push(name, Action::LengthViolation, format!("length {len} not in [{}, {max}]", spec.answer_min));
        }
        values.push((spec.name.clone(), value));
    }
    for key in raw.keys() {
        if schema.get(key).is_none() {
            log.push(key, Action::KeyDropped, "not in schema");
        }
    }
    (
        MetadataRecord {
            category: schema.category,
            values,
        },
        log,
    )
}

fn apply_options<S: Similarity + ?Sized>(
    sim: &S,
    value: &mut AnswerValue,
    spec: &AttributeSpec,
    schema: &Schema,
    log: &mut ValidationLog,
) {
    let name = spec.name.as_str();
    let options = spec.text_options();
    match value {
        AnswerValue::Text(s) if !options.is_empty() && !s.trim().is_empty() => {
            let (chosen, actions) = choose_option(sim, s, &options);
            for (a, d) in actions {
                log.push(name, a, d);
            }
            *s = chosen;
        }
        AnswerValue::TextList(items) if !options.is_empty() => {
            for item in items.iter_mut() {
                let (chosen, actions) = choose_option(sim, item, &options);
                for (a, d) in actions {
                    log.push(name, a, d);
                }
                *item = chosen;
            }
        }
        AnswerValue::KeyedRecordList(rows) => {
            if let AnswerType::KeyedRecordList(keys) = &spec.answer_type {
                for row in rows.iter_mut() {
                    normalize_row(sim, row, keys, schema, name, log);
                }
            }
        }
        _ => {}
    }
}

/// Type of a keyed-record cell, borrowed from the schema attribute with the
/// same name when there is one (`Volume` is a number, `Dialect` takes the
/// dialect options, ...).
fn normalize_row<S: Similarity + ?Sized>(
    sim: &S,
    row: &mut KeyedRow,
    keys: &[String],
    schema: &Schema,
    attribute: &str,
    log: &mut ValidationLog,
) {
    let mut out = KeyedRow::default();
    for (k, _) in &row.0 {
        if !keys.contains(k) {
            log.push(attribute, Action::KeyDropped, format!("row key `{k}`"));
        }
    }
    for key in keys {
        let key_spec = schema.get(key);
        let as_number = matches!(key_spec.map(|s| &s.answer_type), Some(AnswerType::Number));
        let as_flag = matches!(key_spec.map(|s| &s.answer_type), Some(AnswerType::Flag));
        let cell = match row.get(key).cloned() {
            None => {
                log.push(attribute, Action::Defaulted, format!("row key `{key}` missing"));
                if as_number {
                    Scalar::Number(0.0)
                } else if as_flag {
                    Scalar::Flag(false)
                } else {
                    Scalar::Text(String::new())
                }
            }
            Some(cell) if as_number => match cell {
                Scalar::Number(n) => Scalar::Number(n),
                Scalar::Text(t) => match parse_number(&t) {
                    Some(n) => {
                        log.push(attribute, Action::Cast, format!("row key `{key}`: string -> float"));
                        Scalar::Number(n)
                    }
                    None => {
                        log.push(attribute, Action::Defaulted, format!("row key `{key}`: cannot cast {t:?}"));
                        Scalar::Number(0.0)
                    }
                },
                Scalar::Flag(_) => {
                    log.push(attribute, Action::Defaulted, format!("row key `{key}`: cannot cast bool"));
                    Scalar::Number(0.0)
                }
            },
            Some(Scalar::Flag(b)) if as_flag => Scalar::Flag(b),
            Some(cell) => {
                let text = match cell {
                    Scalar::Text(t) => t,
                    Scalar::Number(n) => {
                        log.push(attribute, Action::Cast, format!("row key `{key}`: number -> str"));
                        render_number(n)
                    }
                    Scalar::Flag(b) => {
                        log.push(attribute, Action::Cast, format!("row key `{key}`: bool -> str"));
                        b.to_string()
                    }
                };
                let options = key_spec.map(AttributeSpec::text_options).unwrap_or_default();
                if options.is_empty() || text.trim().is_empty() {
                    Scalar::Text(text)
                } else {
                    let (chosen, actions) = choose_option(sim, &text, &options);
                    for (a, d) in actions {
                        log.push(attribute, a, format!("row key `{key}`: {d}"));
                    }
                    Scalar::Text(chosen)
                }
            }
        };
        out.0.push((key.clone(), cell));
    }
    *row = out;
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use serde_json::json;

    fn ar() -> Schema {
        Category::Ar.builtin_schema()
    }

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    pub(crate) fn sample_gold() -> Value {
        json!({
            "Name": "SANAD",
            "Subsets": [{"Name": "Gulf", "Volume": 1000.0, "Unit": "sentences", "Dialect": "Gulf"}],
            "Link": "https://github.com/u/sanad",
            "HF Link": "",
            "License": "CC BY 4.0",
            "Year": 2020,
            "Language": "ar",
            "Dialect": "mixed",
            "Domain": ["news articles"],
            "Form": "text",
            "Collection Style": ["crawling", "human annotation"],
            "Description": "A news corpus.",
            "Volume": 40000.0,
            "Unit": "documents",
            "Ethical Risks": "Low",
            "Provider": ["KAUST"],
            "Derived From": [],
            "Paper Title": "SANAD: A News Corpus",
            "Paper Link": "https://arxiv.org/abs/0000.00000",
            "Script": "Arab",
            "Tokenized": false,
            "Host": "GitHub",
            "Access": "Free",
            "Cost": "",
            "Test Split": true,
            "Tasks": ["topic classification"],
            "Venue Title": "LREC",
            "Venue Type": "conference",
            "Venue Name": "",
            "Authors": ["A. Author"],
            "Affiliations": [],
            "Abstract": "We present a large Arabic news corpus."
        })
    }

    #[test]
    fn coerce_examples() {
        let s = ar();
        let (v, a) = coerce_type(&json!("1000"), s.get("Volume").unwrap());
        assert_eq!(v, AnswerValue::Number(1000.0));
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].0, Action::Cast);

        let (v, a) = coerce_type(&json!(true), s.get("Tokenized").unwrap());
        assert_eq!(v, AnswerValue::Flag(true));
        assert!(a.is_empty());

        let (v, a) = coerce_type(&json!({"a": 1}), s.get("Name").unwrap());
        assert_eq!(v, AnswerValue::Text(String::new()));
        assert_eq!(a[0].0, Action::Defaulted);
    }

    #[test]
    fn coerce_more() {
        let s = ar();
        let year = s.get("Year").unwrap();
        assert_eq!(coerce_type(&json!("2019"), year).0, AnswerValue::Year(2019));
        assert_eq!(coerce_type(&json!("May 2021"), year).0, AnswerValue::Year(2021));
        assert_eq!(coerce_type(&json!(1850), year).0, AnswerValue::Year(0));
        assert_eq!(coerce_type(&json!(2020.0), year).0, AnswerValue::Year(2020));
        let tasks = s.get("Tasks").unwrap();
        assert_eq!(coerce_type(&json!("summarization"), tasks).0, AnswerValue::TextList(vec!["summarization".into()]));
        let name = s.get("Name").unwrap();
        assert_eq!(coerce_type(&json!(["a", "b"]), name).0, AnswerValue::Text("a, b".into()));
        let vol = s.get("Volume").unwrap();
        assert_eq!(coerce_type(&json!("40,000"), vol).0, AnswerValue::Number(40000.0));
        assert_eq!(coerce_type(&json!("lots"), vol).0, AnswerValue::Number(0.0));
        assert_eq!(coerce_type(&json!("NaN"), vol).0, AnswerValue::Number(0.0));
        let flag = s.get("Test Split").unwrap();
        assert_eq!(coerce_type(&json!("TRUE"), flag).0, AnswerValue::Flag(true));
        assert_eq!(coerce_type(&json!(1), flag).1[0].0, Action::Defaulted);
    }

    #[test]
    fn urls() {
        let link = ar().get("Link").unwrap().clone();
        assert_eq!(coerce_type(&json!("https://x.org/a"), &link).0, AnswerValue::Url("https://x.org/a".into()));
        let (v, a) = coerce_type(&json!("github.com/u/r"), &link);
        assert_eq!(v, AnswerValue::Url("https://github.com/u/r".into()));
        assert_eq!(a[0].0, Action::Cast);
        let (v, a) = coerce_type(&json!("not a link"), &link);
        assert_eq!(v, AnswerValue::Url(String::new()));
        assert_eq!(a[0].0, Action::Defaulted);
        assert!(!is_well_formed_url("https://"));
        assert!(!is_well_formed_url("ht tp://x"));
    }

    #[test]
    fn option_matching() {
        let s = ar();
        let license = s.get("License").unwrap();
        let (c, a) = match_option("CC BY 4.0", license);
        assert_eq!(c, "CC BY 4.0");
        assert!(a.is_empty());
        let (c, a) = match_option("MIT", license);
        assert_eq!(c, "MIT License");
        assert_eq!(a[0].0, Action::OptionMatched);
        let (c, a) = match_option("cc by-nc 4.0", license);
        assert_eq!(c, "CC BY-NC 4.0");
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn gold_is_a_fixed_point() {
        let s = ar();
        let (rec, log) = validate_record(&obj(sample_gold()), &s);
        assert!(log.is_empty(), "{log:?}");
        assert!(rec.is_complete_for(&s));
        assert_eq!(rec.to_json_object(), obj(sample_gold()));
    }

    #[test]
    fn missing_license_defaults_and_violates_length() {
        let s = ar();
        let mut raw = obj(sample_gold());
        raw.remove("License");
        let (rec, log) = validate_record(&raw, &s);
        assert_eq!(rec.get("License"), Some(&AnswerValue::Text(String::new())));
        let entries: Vec<_> = log.entries().iter().filter(|e| e.attribute == "License").collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].action, Action::Defaulted);
        assert_eq!(entries[1].action, Action::LengthViolation);
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn long_lists_are_kept_and_reported() {
        let s = ar();
        let mut raw = obj(sample_gold());
        raw.insert(
            "Tasks".into(),
            json!(["machine translation", "summarization", "question answering", "language modeling", "text generation", "other"]),
        );
        let (rec, log) = validate_record(&raw, &s);
        assert_eq!(rec.get("Tasks").unwrap().length(), 6);
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries()[0].action, Action::LengthViolation);
    }

    #[test]
    fn extra_keys_dropped() {
        let s = ar();
        let mut raw = obj(sample_gold());
        raw.insert("Colour".into(), json!("red"));
        let (rec, log) = validate_record(&raw, &s);
        assert_eq!(rec.len(), 32);
        assert_eq!(log.count(Action::KeyDropped), 1);
    }

    #[test]
    fn keyed_rows_are_typed_and_matched() {
        let s = ar();
        let mut raw = obj(sample_gold());
        raw.insert("Subsets".into(), json!([{"Name": "EG", "Volume": "2,000", "Dialect": "egypt", "Extra": 1}]));
        let (rec, log) = validate_record(&raw, &s);
        let AnswerValue::KeyedRecordList(rows) = rec.get("Subsets").unwrap() else { panic!() };
        assert_eq!(rows[0].get("Volume"), Some(&Scalar::Number(2000.0)));
        assert_eq!(rows[0].get("Dialect"), Some(&Scalar::Text("Egypt".into())));
        assert_eq!(rows[0].get("Unit"), Some(&Scalar::Text(String::new())));
        assert_eq!(rows[0].0.len(), 4);
        assert_eq!(log.count(Action::KeyDropped), 1);
        assert_eq!(log.count(Action::Defaulted), 1);
        let (again, log2) = validate_record(&rec.to_json_object(), &s);
        assert_eq!(again, rec);
        assert!(log2.is_clean());
    }

    #[test]
    fn record_file_round_trip() {
        let s = ar();
        let (rec, _) = validate_record(&obj(sample_gold()), &s);
        let text = rec.to_json_string();
        assert!(text.starts_with("{\n    \"Name\": \"SANAD\",\n    \"Subsets\""));
        assert_eq!(MetadataRecord::from_json_str(&text, &s).unwrap(), rec);
        assert!(matches!(MetadataRecord::from_json_str("{}", &s), Err(RecordError::Missing(_))));
    }
}
