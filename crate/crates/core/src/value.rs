//! Typed answers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::ser::{SerializeMap, SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::Value;

use crate::schema::AnswerType;

/// Scalar cell of a keyed record (one row of e.g. `Subsets`).
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Number(f64),
    Flag(bool),
}

impl Scalar {
    pub fn from_json(v: &Value) -> Option<Scalar> {
        match v {
            Value::String(s) => Some(Scalar::Text(s.clone())),
            Value::Number(n) => n.as_f64().map(Scalar::Number),
            Value::Bool(b) => Some(Scalar::Flag(*b)),
            _ => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        match self {
            Scalar::Text(s) => s.trim().is_empty(),
            Scalar::Number(n) => *n == 0.0,
            Scalar::Flag(_) => false,
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Text(t) => s.serialize_str(t),
            Scalar::Number(n) => s.serialize_f64(*n),
            Scalar::Flag(b) => s.serialize_bool(*b),
        }
    }
}

/// One keyed record; entries follow the attribute's key-name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyedRow(pub Vec<(String, Scalar)>);

impl KeyedRow {
    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

impl Serialize for KeyedRow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnswerValue {
    Text(String),
    Url(String),
    /// `0` means unknown.
    Year(i32),
    TextList(Vec<String>),
    Number(f64),
    Flag(bool),
    KeyedRecordList(Vec<KeyedRow>),
}

impl AnswerValue {
    pub fn has_type(&self, t: &AnswerType) -> bool {
        matches!(
            (self, t),
            (AnswerValue::Text(_), AnswerType::Text)
                | (AnswerValue::Url(_), AnswerType::Url)
                | (AnswerValue::Year(_), AnswerType::Year)
                | (AnswerValue::TextList(_), AnswerType::TextList)
                | (AnswerValue::Number(_), AnswerType::Number)
                | (AnswerValue::Flag(_), AnswerType::Flag)
                | (AnswerValue::KeyedRecordList(_), AnswerType::KeyedRecordList(_))
        )
    }

    /// Answer length as bounded by `answer_min`/`answer_max`: item count for
    /// lists, whitespace-separated words otherwise. An unknown year is empty.
    pub fn length(&self) -> usize {
        match self {
            AnswerValue::Text(s) | AnswerValue::Url(s) => s.split_whitespace().count(),
            AnswerValue::Year(y) => usize::from(*y != 0),
            AnswerValue::TextList(items) => items.len(),
            AnswerValue::KeyedRecordList(rows) => rows.len(),
            AnswerValue::Number(_) | AnswerValue::Flag(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    /// Strict conversion used for annotation and prediction files: the JSON
    /// must already carry the declared type. Integers are accepted for
    /// floats and years.
    pub fn from_typed_json(v: &Value, t: &AnswerType) -> Option<AnswerValue> {
        Some(match t {
            AnswerType::Text => AnswerValue::Text(v.as_str()?.to_string()),
            AnswerType::Url => AnswerValue::Url(v.as_str()?.to_string()),
            AnswerType::Year => AnswerValue::Year(i32::try_from(v.as_i64()?).ok()?),
            AnswerType::Number => AnswerValue::Number(v.as_f64()?),
            AnswerType::Flag => AnswerValue::Flag(v.as_bool()?),
            AnswerType::TextList => AnswerValue::TextList(
                v.as_array()?
                    .iter()
                    .map(|i| i.as_str().map(ToString::to_string))
                    .collect::<Option<Vec<_>>>()?,
            ),
            AnswerType::KeyedRecordList(keys) => {
                let mut rows = Vec::new();
                for item in v.as_array()? {
                    let obj = item.as_object()?;
                    if obj.keys().any(|k| !keys.contains(k)) {
                        return None;
                    }
                    let mut row = KeyedRow::default();
                    for k in keys {
                        if let Some(cell) = obj.get(k) {
                            row.0.push((k.clone(), Scalar::from_json(cell)?));
                        }
                    }
                    rows.push(row);
                }
                AnswerValue::KeyedRecordList(rows)
            }
        })
    }
}

impl Serialize for AnswerValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AnswerValue::Text(t) | AnswerValue::Url(t) => s.serialize_str(t),
            AnswerValue::Year(y) => s.serialize_i32(*y),
            AnswerValue::Number(n) => s.serialize_f64(*n),
            AnswerValue::Flag(b) => s.serialize_bool(*b),
            AnswerValue::TextList(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for i in items {
                    seq.serialize_element(i)?;
                }
                seq.end()
            }
            AnswerValue::KeyedRecordList(rows) => {
                let mut seq = s.serialize_seq(Some(rows.len()))?;
                for r in rows {
                    seq.serialize_element(r)?;
                }
                seq.end()
            }
        }
    }
}
