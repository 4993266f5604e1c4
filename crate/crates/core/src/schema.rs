//! Attribute schemata and length profiles.
//!
//! A schema file is a JSON object mapping attribute names to attribute
//! descriptions. Attribute order is significant: it drives the column order
//! of the system prompt and of every serialized record, so parsing walks the
//! top-level object as a stream instead of going through a hash map.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::value::{AnswerValue, KeyedRow};

const ARABIC_SCHEMA: &str = include_str!("../fixtures/schemas/ar.json");
const ENGLISH_SCHEMA: &str = include_str!("../fixtures/schemas/en.json");
const FRENCH_SCHEMA: &str = include_str!("../fixtures/schemas/fr.json");
const JAPANESE_SCHEMA: &str = include_str!("../fixtures/schemas/jp.json");
const RUSSIAN_SCHEMA: &str = include_str!("../fixtures/schemas/ru.json");
const MULTI_SCHEMA: &str = include_str!("../fixtures/schemas/multi.json");

const LOW_PROFILE: &str = include_str!("../fixtures/profiles/low.json");
const MID_PROFILE: &str = include_str!("../fixtures/profiles/mid.json");
const HIGH_PROFILE: &str = include_str!("../fixtures/profiles/high.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("malformed schema JSON: {0}")]
    Json(String),
    #[error("attribute `{attribute}`: {message}")]
    Attribute { attribute: String, message: String },
    #[error("attribute `{attribute}`: unknown answer_type literal `{literal}`")]
    UnknownAnswerType { attribute: String, literal: String },
    #[error("attribute `{attribute}` violates `{rule}`")]
    Invariant { attribute: String, rule: Rule },
    #[error("length profile overrides unknown attribute `{0}`")]
    UnknownOverride(String),
    #[error("malformed length profile: {0}")]
    Profile(String),
}

fn attr_err(attribute: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::Attribute {
        attribute: attribute.to_owned(),
        message: message.into(),
    }
}

/// Language category a schema is written for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Ar,
    En,
    Fr,
    Jp,
    Ru,
    Multi,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Ar,
        Category::En,
        Category::Fr,
        Category::Jp,
        Category::Ru,
        Category::Multi,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Category::Ar => "ar",
            Category::En => "en",
            Category::Fr => "fr",
            Category::Jp => "jp",
            Category::Ru => "ru",
            Category::Multi => "multi",
        }
    }

    /// Human-readable language name, as used in synthetic paper titles.
    pub fn language_name(self) -> &'static str {
        match self {
            Category::Ar => "Arabic",
            Category::En => "English",
            Category::Fr => "French",
            Category::Jp => "Japanese",
            Category::Ru => "Russian",
            Category::Multi => "multilingual",
        }
    }

    pub fn from_code(code: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.code() == code)
    }

    /// The schema shipped with the crate for this category.
    pub fn builtin_schema(self) -> Schema {
        let raw = match self {
            Category::Ar => ARABIC_SCHEMA,
            Category::En => ENGLISH_SCHEMA,
            Category::Fr => FRENCH_SCHEMA,
            Category::Jp => JAPANESE_SCHEMA,
            Category::Ru => RUSSIAN_SCHEMA,
            Category::Multi => MULTI_SCHEMA,
        };
        parse_schema(raw, self).expect("shipped schema fixtures are valid")
    }

    pub fn builtin_schema_text(self) -> &'static str {
        match self {
            Category::Ar => ARABIC_SCHEMA,
            Category::En => ENGLISH_SCHEMA,
            Category::Fr => FRENCH_SCHEMA,
            Category::Jp => JAPANESE_SCHEMA,
            Category::Ru => RUSSIAN_SCHEMA,
            Category::Multi => MULTI_SCHEMA,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValidationGroup {
    Diversity,
    Accessibility,
    Content,
    Evaluation,
}

impl ValidationGroup {
    pub const ALL: [ValidationGroup; 4] = [
        ValidationGroup::Diversity,
        ValidationGroup::Accessibility,
        ValidationGroup::Content,
        ValidationGroup::Evaluation,
    ];

    pub fn literal(self) -> &'static str {
        match self {
            ValidationGroup::Diversity => "DIVERSITY",
            ValidationGroup::Accessibility => "ACCESSIBILITY",
            ValidationGroup::Content => "CONTENT",
            ValidationGroup::Evaluation => "EVALUATION",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        ValidationGroup::ALL.into_iter().find(|g| g.literal() == s)
    }
}

/// Answer type of an attribute. `KeyedRecordList` carries the ordered key
/// names written between the brackets of `List[Dict[...]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerType {
    Text,
    Url,
    Year,
    TextList,
    Number,
    Flag,
    KeyedRecordList(Vec<String>),
}

impl AnswerType {
    /// Parses a schema-file literal such as `"date[year]"`.
    pub fn from_literal(literal: &str) -> Option<AnswerType> {
        let t = match literal {
            "str" => AnswerType::Text,
            "url" => AnswerType::Url,
            "date[year]" => AnswerType::Year,
            "List[str]" => AnswerType::TextList,
            "float" => AnswerType::Number,
            "bool" => AnswerType::Flag,
            other => {
                let inner = other.strip_prefix("List[Dict[")?.strip_suffix("]]")?;
                let keys = inner
                    .split(',')
                    .map(|k| k.trim().to_string())
                    .collect::<Vec<_>>();
                AnswerType::KeyedRecordList(keys)
            }
        };
        Some(t)
    }

    pub fn literal(&self) -> String {
        match self {
            AnswerType::Text => "str".into(),
            AnswerType::Url => "url".into(),
            AnswerType::Year => "date[year]".into(),
            AnswerType::TextList => "List[str]".into(),
            AnswerType::Number => "float".into(),
            AnswerType::Flag => "bool".into(),
            AnswerType::KeyedRecordList(keys) => format!("List[Dict[{}]]", keys.join(", ")),
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, AnswerType::TextList | AnswerType::KeyedRecordList(_))
    }
}

/// One entry of an `options` list. Flag attributes use JSON booleans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptionLiteral {
    Text(String),
    Bool(bool),
}

impl OptionLiteral {
    pub fn label(&self) -> String {
        match self {
            OptionLiteral::Text(s) => s.clone(),
            OptionLiteral::Bool(b) => b.to_string(),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            OptionLiteral::Text(s) => Some(s),
            OptionLiteral::Bool(_) => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            OptionLiteral::Text(s) => Value::String(s.clone()),
            OptionLiteral::Bool(b) => Value::Bool(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpec {
    pub name: String,
    pub question: String,
    pub options: Option<Vec<OptionLiteral>>,
    /// Option label to description, in file order.
    pub option_descriptions: Option<Vec<(String, String)>>,
    pub answer_type: AnswerType,
    pub validation_group: Option<ValidationGroup>,
    pub answer_min: u32,
    pub answer_max: Option<u32>,
}

impl AttributeSpec {
    pub fn new(name: &str, question: &str, answer_type: AnswerType) -> Self {
        AttributeSpec {
            name: name.into(),
            question: question.into(),
            options: None,
            option_descriptions: None,
            answer_type,
            validation_group: None,
            answer_min: 0,
            answer_max: None,
        }
    }

    pub fn is_optional(&self) -> bool {
        self.answer_min == 0
    }

    /// Text options in file order with duplicates removed.
    pub fn text_options(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for o in self.options.iter().flatten() {
            if let Some(t) = o.as_text() {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Answer length for bound checks. A single-choice answer picked from
    /// `options` counts as one unit however many words the option has.
    pub fn answer_length(&self, value: &AnswerValue) -> usize {
        match value {
            AnswerValue::Text(t) if self.options.is_some() => usize::from(!t.trim().is_empty()),
            v => v.length(),
        }
    }

    pub fn length_in_bounds(&self, len: usize) -> bool {
        let len = len as u64;
        len >= u64::from(self.answer_min) && self.answer_max.is_none_or(|m| len <= u64::from(m))
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let mut push = |rule| {
            out.push(Violation {
                attribute: self.name.clone(),
                rule,
            })
        };
        if self.question.trim().is_empty() {
            push(Rule::EmptyQuestion);
        }
        if let Some(max) = self.answer_max {
            if max == 0 {
                push(Rule::ZeroMax);
            }
            if self.answer_min > max {
                push(Rule::MinExceedsMax);
            }
        }
        if let Some(descriptions) = &self.option_descriptions {
            let labels: Vec<String> = self
                .options
                .iter()
                .flatten()
                .map(OptionLiteral::label)
                .collect();
            for (key, _) in descriptions {
                if !labels.contains(key) {
                    push(Rule::DescriptionWithoutOption);
                }
            }
        }
        if let AnswerType::KeyedRecordList(keys) = &self.answer_type {
            if keys.is_empty() || keys.iter().any(|k| k.is_empty()) {
                push(Rule::EmptyKeyNames);
            }
            for (i, k) in keys.iter().enumerate() {
                if keys[..i].contains(k) {
                    push(Rule::DuplicateKeyName);
                    break;
                }
            }
        }
    }
}

/// Identifier of the invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    EmptyQuestion,
    MinExceedsMax,
    ZeroMax,
    DescriptionWithoutOption,
    EmptyKeyNames,
    DuplicateKeyName,
    DuplicateAttribute,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::EmptyQuestion => "empty-question",
            Rule::MinExceedsMax => "min>max",
            Rule::ZeroMax => "max-not-positive",
            Rule::DescriptionWithoutOption => "description-without-option",
            Rule::EmptyKeyNames => "empty-key-names",
            Rule::DuplicateKeyName => "duplicate-key-name",
            Rule::DuplicateAttribute => "duplicate-attribute",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub attribute: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.attribute, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub category: Category,
    pub attributes: Vec<AttributeSpec>,
    /// The file text this schema was parsed from. Cleared by any edit, so
    /// that [`Schema::prompt_text`] never shows stale bounds to a model.
    source: Option<String>,
}

impl Schema {
    pub fn new(category: Category, attributes: Vec<AttributeSpec>) -> Self {
        Schema {
            category,
            attributes,
            source: None,
        }
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    /// Schema text shown to the model: the original file when unmodified,
    /// otherwise a fresh rendering.
    pub fn prompt_text(&self) -> String {
        match &self.source {
            Some(s) => s.clone(),
            None => self.to_json_string(),
        }
    }

    /// Renders the schema in the file format, keys in canonical order.
    pub fn to_json_string(&self) -> String {
        let mut out = String::from("{\n");
        for (i, a) in self.attributes.iter().enumerate() {
            let mut fields: Vec<(&str, String)> = Vec::new();
            fields.push(("question", json_str(&a.question)));
            if let Some(options) = &a.options {
                let items: Vec<String> = options
                    .iter()
                    .map(|o| serde_json::to_string(&o.to_json()).unwrap_or_default())
                    .collect();
                fields.push(("options", format!("[{}]", items.join(", "))));
            }
            if let Some(descriptions) = &a.option_descriptions {
                let items: Vec<String> = descriptions
                    .iter()
                    .map(|(k, v)| format!("\n            {}: {}", json_str(k), json_str(v)))
                    .collect();
                fields.push(("option_description", format!("{{{}\n        }}", items.join(","))));
            }
            fields.push(("answer_type", json_str(&a.answer_type.literal())));
            if let Some(g) = a.validation_group {
                fields.push(("validation_group", json_str(g.literal())));
            }
            fields.push(("answer_min", a.answer_min.to_string()));
            if let Some(max) = a.answer_max {
                fields.push(("answer_max", max.to_string()));
            }
            out.push_str(&format!("    {}: {{\n", json_str(&a.name)));
            let body: Vec<String> = fields
                .into_iter()
                .map(|(k, v)| format!("        \"{k}\": {v}"))
                .collect();
            out.push_str(&body.join(",\n"));
            out.push_str("\n    }");
            if i + 1 < self.attributes.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push('}');
        out.push('\n');
        out
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_default()
}

/// Top-level object as an ordered list of entries.
struct OrderedEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries: Vec<(String, Value)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    if entries.iter().any(|(seen, _)| *seen == k) {
                        return Err(de::Error::custom(format!("duplicate attribute `{k}`")));
                    }
                    entries.push((k, v));
                }
                Ok(OrderedEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

const ATTRIBUTE_KEYS: [&str; 7] = [
    "question",
    "options",
    "option_description",
    "answer_type",
    "validation_group",
    "answer_min",
    "answer_max",
];

/// Parses schema-file text, preserving attribute order.
pub fn parse_schema(raw: &str, category: Category) -> Result<Schema, SchemaError> {
    let OrderedEntries(entries) =
        serde_json::from_str(raw).map_err(|e| SchemaError::Json(e.to_string()))?;
    let mut attributes = Vec::with_capacity(entries.len());
    for (name, value) in entries {
        attributes.push(parse_attribute(&name, &value)?);
    }
    let schema = Schema {
        category,
        attributes,
        source: Some(raw.to_owned()),
    };
    if let Some(v) = validate_schema(&schema).into_iter().next() {
        return Err(SchemaError::Invariant {
            attribute: v.attribute,
            rule: v.rule,
        });
    }
    Ok(schema)
}

fn parse_attribute(name: &str, value: &Value) -> Result<AttributeSpec, SchemaError> {
    let obj = value
        .as_object()
        .ok_or_else(|| attr_err(name, "attribute description must be an object"))?;
    if let Some(unknown) = obj.keys().find(|k| !ATTRIBUTE_KEYS.contains(&k.as_str())) {
        return Err(attr_err(name, format!("unknown key `{unknown}`")));
    }
    let question = obj
        .get("question")
        .ok_or_else(|| attr_err(name, "missing `question`"))?
        .as_str()
        .ok_or_else(|| attr_err(name, "`question` must be a string"))?
        .to_owned();
    let literal = obj
        .get("answer_type")
        .ok_or_else(|| attr_err(name, "missing `answer_type`"))?
        .as_str()
        .ok_or_else(|| attr_err(name, "`answer_type` must be a string"))?;
    let answer_type =
        AnswerType::from_literal(literal).ok_or_else(|| SchemaError::UnknownAnswerType {
            attribute: name.to_owned(),
            literal: literal.to_owned(),
        })?;
    let options = match obj.get("options") {
        None => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|item| match item {
                    Value::String(s) => Ok(OptionLiteral::Text(s.clone())),
                    Value::Bool(b) => Ok(OptionLiteral::Bool(*b)),
                    _ => Err(attr_err(name, "options must be strings or booleans")),
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Some(_) => return Err(attr_err(name, "`options` must be a list")),
    };
    let option_descriptions = match obj.get("option_description") {
        None => None,
        Some(Value::Object(map)) => {
            // serde_json's map is sorted; restore option order where possible.
            let mut pairs: Vec<(String, String)> = Vec::with_capacity(map.len());
            for (k, v) in map {
                let text = v
                    .as_str()
                    .ok_or_else(|| attr_err(name, "option descriptions must be strings"))?;
                pairs.push((k.clone(), text.to_owned()));
            }
            if let Some(opts) = &options {
                let position = |k: &str| {
                    opts.iter()
                        .position(|o| o.label() == k)
                        .unwrap_or(usize::MAX)
                };
                pairs.sort_by_key(|(k, _)| position(k));
            }
            Some(pairs)
        }
        Some(_) => return Err(attr_err(name, "`option_description` must be an object")),
    };
    let validation_group = match obj.get("validation_group") {
        None => None,
        Some(v) => {
            let s = v
                .as_str()
                .ok_or_else(|| attr_err(name, "`validation_group` must be a string"))?;
            Some(
                ValidationGroup::from_literal(s)
                    .ok_or_else(|| attr_err(name, format!("unknown validation_group `{s}`")))?,
            )
        }
    };
    let bound = |key: &str| -> Result<Option<u32>, SchemaError> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(Some)
                .ok_or_else(|| attr_err(name, format!("`{key}` must be a non-negative integer"))),
        }
    };
    let answer_min = bound("answer_min")?.ok_or_else(|| attr_err(name, "missing `answer_min`"))?;
    let answer_max = bound("answer_max")?;
    Ok(AttributeSpec {
        name: name.to_owned(),
        question,
        options,
        option_descriptions,
        answer_type,
        validation_group,
        answer_min,
        answer_max,
    })
}

/// Lists every invariant violation; empty means the schema is sound.
pub fn validate_schema(schema: &Schema) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, a) in schema.attributes.iter().enumerate() {
        if schema.attributes[..i].iter().any(|b| b.name == a.name) {
            out.push(Violation {
                attribute: a.name.clone(),
                rule: Rule::DuplicateAttribute,
            });
        }
        a.violations(&mut out);
    }
    out
}

/// Value written when an answer is missing or cannot be cast.
pub fn default_answer(spec: &AttributeSpec) -> AnswerValue {
    match spec.answer_type {
        AnswerType::Text => AnswerValue::Text(String::new()),
        AnswerType::Url => AnswerValue::Url(String::new()),
        AnswerType::Year => AnswerValue::Year(0),
        AnswerType::TextList => AnswerValue::TextList(Vec::new()),
        AnswerType::Number => AnswerValue::Number(0.0),
        AnswerType::Flag => AnswerValue::Flag(false),
        AnswerType::KeyedRecordList(_) => AnswerValue::KeyedRecordList(Vec::<KeyedRow>::new()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileLevel {
    Low,
    Mid,
    High,
}

impl ProfileLevel {
    pub const ALL: [ProfileLevel; 3] = [ProfileLevel::Low, ProfileLevel::Mid, ProfileLevel::High];

    pub fn name(self) -> &'static str {
        match self {
            ProfileLevel::Low => "low",
            ProfileLevel::Mid => "mid",
            ProfileLevel::High => "high",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        ProfileLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
    }
}

/// Bound override for one attribute: `(answer_min, answer_max)`.
pub type Bounds = (u32, Option<u32>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthProfile {
    pub level: ProfileLevel,
    pub overrides: Vec<(String, Bounds)>,
}

#[derive(Deserialize)]
struct ProfileFile {
    level: String,
    #[serde(default)]
    overrides: serde_json::Map<String, Value>,
}

impl LengthProfile {
    /// Shipped profile for `level`, read from the profile fixtures.
    pub fn builtin(level: ProfileLevel) -> Self {
        let raw = match level {
            ProfileLevel::Low => LOW_PROFILE,
            ProfileLevel::Mid => MID_PROFILE,
            ProfileLevel::High => HIGH_PROFILE,
        };
        LengthProfile::parse(raw).expect("shipped profile fixtures are valid")
    }

    /// Parses `{"level": "mid", "overrides": {"Name": [1, 4], ...}}`;
    /// a `null` maximum means unbounded.
    pub fn parse(raw: &str) -> Result<Self, SchemaError> {
        let file: ProfileFile =
            serde_json::from_str(raw).map_err(|e| SchemaError::Profile(e.to_string()))?;
        let level = ProfileLevel::from_name(&file.level)
            .ok_or_else(|| SchemaError::Profile(format!("unknown level `{}`", file.level)))?;
        let mut overrides = Vec::with_capacity(file.overrides.len());
        for (name, v) in file.overrides {
            let pair = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                SchemaError::Profile(format!("override for `{name}` must be [min, max]"))
            })?;
            let min = pair[0]
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| SchemaError::Profile(format!("bad minimum for `{name}`")))?;
            let max = match &pair[1] {
                Value::Null => None,
                m => Some(
                    m.as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| SchemaError::Profile(format!("bad maximum for `{name}`")))?,
                ),
            };
            overrides.push((name, (min, max)));
        }
        Ok(LengthProfile { level, overrides })
    }

    pub fn bounds_for(&self, name: &str) -> Option<Bounds> {
        self.overrides
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| *b)
    }
}

/// Copy of `schema` with the profile's bounds substituted.
pub fn apply_length_profile(schema: &Schema, profile: &LengthProfile) -> Result<Schema, SchemaError> {
    let mut out = schema.clone();
    for (name, (min, max)) in &profile.overrides {
        let spec = out
            .attributes
            .iter_mut()
            .find(|a| &a.name == name)
            .ok_or_else(|| SchemaError::UnknownOverride(name.clone()))?;
        if spec.answer_min != *min || spec.answer_max != *max {
            spec.answer_min = *min;
            spec.answer_max = *max;
            out.source = None;
        }
    }
    Ok(out)
}

impl serde::Serialize for Category {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl serde::Serialize for ValidationGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.literal())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        Category::from_code(&code).ok_or_else(|| de::Error::custom(format!("unknown category `{code}`")))
    }
}

impl<'de> Deserialize<'de> for ValidationGroup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lit = String::deserialize(d)?;
        ValidationGroup::from_literal(&lit).ok_or_else(|| de::Error::custom(format!("unknown validation group `{lit}`")))
    }
}
