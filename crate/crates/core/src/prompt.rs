//! System prompt, chat message assembly and synthetic few-shot examples.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::Document;
use crate::schema::{default_answer, AnswerType, AttributeSpec, Category, OptionLiteral, Schema};
use crate::validate::MetadataRecord;
use crate::value::{AnswerValue, KeyedRow, Scalar};

/// Published system prompt; `{columns}` is replaced by the attribute names.
pub const SYSTEM_PROMPT_TEMPLATE: &str = include_str!("../fixtures/prompts/system.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
        }
    }
}

/// Chat transcript: a system message, alternating user/assistant turns, and
/// a final user turn.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct MessageSequence {
    messages: Vec<Message>,
}

impl MessageSequence {
    pub fn new(system: impl Into<String>) -> Self {
        MessageSequence {
            messages: alloc::vec![Message::new(Role::System, system)],
        }
    }

    pub fn push(&mut self, role: Role, content: impl Into<String>) {
        self.messages.push(Message::new(role, content));
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&Message> {
        self.messages.last()
    }

    pub fn is_well_formed(&self) -> bool {
        let Some((first, rest)) = self.messages.split_first() else {
            return false;
        };
        first.role == Role::System
            && !rest.is_empty()
            && rest.iter().enumerate().all(|(i, m)| {
                m.role == if i % 2 == 0 { Role::User } else { Role::Assistant }
            })
            && rest.len() % 2 == 1
    }
}

pub fn build_system_prompt(schema: &Schema) -> String {
    let columns: Vec<&str> = schema.names().collect();
    SYSTEM_PROMPT_TEMPLATE
        .trim_end()
        .replace("{columns}", &columns.join(", "))
}

/// User turn carrying the schema and the paper; the paper text comes last.
pub fn user_message(schema_text: &str, paper_text: &str) -> String {
    format!("Input Schema:\n{}\n\nPaper Text:\n{}", schema_text.trim_end(), paper_text)
}

pub fn build_extraction_request(schema: &Schema, doc: &Document, shots: &[SyntheticExample]) -> MessageSequence {
    let schema_text = schema.prompt_text();
    let mut seq = MessageSequence::new(build_system_prompt(schema));
    for shot in shots {
        seq.push(Role::User, user_message(&schema_text, &shot.paper_text));
        seq.push(Role::Assistant, shot.gold.to_json_string());
    }
    seq.push(Role::User, user_message(&schema_text, doc.text()));
    seq
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("synthetic template needs options for attribute `{0}`")]
    MissingOptions(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub paper_text: String,
    pub gold: MetadataRecord,
    pub seed: u64,
}

const NAMES: [&str; 8] = ["Aurora", "Basalt", "Cobalt", "Dune", "Ember", "Fjord", "Granite", "Harbor"];
const AUTHORS: [&str; 2] = ["Jane Doe", "John Smith"];
const AFFILIATION: &str = "Example University";
const TEMPLATE_ATTRIBUTES: [&str; 4] = ["Tasks", "Unit", "Collection Style", "Domain"];

/// Generates `n` template-filled papers with matching gold records. The
/// same `(schema, n, seed)` always yields the same examples.
pub fn generate_synthetic_examples(schema: &Schema, n: usize, seed: u64) -> Result<Vec<SyntheticExample>, PromptError> {
    for name in TEMPLATE_ATTRIBUTES {
        let has_options = schema.get(name).is_some_and(|a| !a.text_options().is_empty());
        if !has_options {
            return Err(PromptError::MissingOptions(name.to_owned()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let example_seed = rng.next_u64();
            synthetic_example(schema, example_seed)
        })
        .collect())
}

fn pick<'a, R: Rng>(rng: &mut R, spec: &'a AttributeSpec) -> &'a str {
    let opts = spec.text_options();
    let concrete: Vec<&str> = opts.iter().copied().filter(|o| *o != "other").collect();
    let pool = if concrete.is_empty() { &opts } else { &concrete };
    pool.choose(rng).copied().unwrap_or("")
}

fn fit_words(text: &str, spec: &AttributeSpec) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    if let Some(max) = spec.answer_max {
        words.truncate(max as usize);
    }
    while words.len() < spec.answer_min as usize {
        words.push("data");
    }
    words.join(" ")
}

struct Draw {
    name: String,
    task: String,
    unit: String,
    style: String,
    domain: String,
    volume: u64,
    year: i32,
    link: String,
    license: Option<String>,
    provider: Option<String>,
    hf_link: Option<String>,
    languages: Vec<(String, u64)>,
}

fn synthetic_example(schema: &Schema, seed: u64) -> SyntheticExample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = |n: &str| schema.get(n).expect("template attributes checked");
    let name = NAMES.choose(&mut rng).copied().unwrap_or("Aurora").to_owned();
    let task = pick(&mut rng, spec("Tasks")).to_owned();
    let unit = pick(&mut rng, spec("Unit")).to_owned();
    let style = pick(&mut rng, spec("Collection Style")).to_owned();
    let domain = pick(&mut rng, spec("Domain")).to_owned();
    let mut volume = rng.random_range(1_000..=1_000_000u64);
    let year = rng.random_range(2000..=2024);
    let link = format!("https://github.com/synthetic-data/{}", name.to_lowercase());
    let provider = rng.random_bool(0.5).then(|| AFFILIATION.to_owned());
    let license = if rng.random_bool(0.5) {
        schema.get("License").map(|l| {
            let named: Vec<&str> = l
                .text_options()
                .into_iter()
                .filter(|o| !matches!(*o, "unknown" | "custom"))
                .collect();
            named.choose(&mut rng).copied().unwrap_or("unknown").to_owned()
        })
    } else {
        None
    };
    let hf_link = rng
        .random_bool(0.5)
        .then(|| format!("https://huggingface.co/datasets/synthetic-data/{}", name.to_lowercase()));

    let mut languages = Vec::new();
    if schema.category == Category::Multi {
        if let Some(lang) = schema.get("Language") {
            let pool: Vec<&str> = lang.text_options().into_iter().filter(|o| *o != "other").collect();
            let k = rng.random_range(2..=4usize).min(pool.len());
            let chosen = rand::seq::index::sample(&mut rng, pool.len(), k);
            let mut idx: Vec<usize> = chosen.into_iter().collect();
            idx.sort_unstable();
            for i in idx {
                languages.push((pool[i].to_owned(), rng.random_range(1_000..=1_000_000u64)));
            }
            volume = languages.iter().map(|(_, v)| v).sum();
        }
    }

    let draw = Draw {
        name,
        task,
        unit,
        style,
        domain,
        volume,
        year,
        link,
        license,
        provider,
        hf_link,
        languages,
    };
    let paper_text = render_paper(schema.category, &draw);
    let gold = gold_record(schema, &draw, &mut rng);
    SyntheticExample { paper_text, gold, seed }
}

fn render_paper(category: Category, d: &Draw) -> String {
    let lang = category.language_name();
    let mut out = String::new();
    out.push_str(&format!("{}: A {} dataset for {}\n", d.name, d.task, lang));
    out.push_str(&AUTHORS.join(", "));
    out.push('\n');
    out.push_str(AFFILIATION);
    out.push('\n');
    out.push_str(&format!(
        "{}, is a {} {} dataset, that contains {} {}.\n",
        d.name, lang, d.task, d.volume, d.unit
    ));
    if !d.languages.is_empty() {
        out.push_str("| Language | Volume |\n|---|---|\n");
        for (l, v) in &d.languages {
            out.push_str(&format!("| {l} | {v} |\n"));
        }
    }
    if let Some(p) = &d.provider {
        out.push_str(&format!("The dataset is provided by {p}. "));
    }
    out.push_str(&format!(
        "The dataset was collected from {} of {} in {}.\n",
        d.style, d.domain, d.year
    ));
    out.push_str(&format!("The dataset is publicly available through this link {}.", d.link));
    if let Some(l) = &d.license {
        out.push_str(&format!(" The dataset is released under the {l} license."));
    }
    out.push('\n');
    if let Some(h) = &d.hf_link {
        out.push_str(&format!("The dataset is also hosted on HuggingFace at {h}.\n"));
    }
    out
}

fn sample_options<R: Rng>(rng: &mut R, spec: &AttributeSpec) -> AnswerValue {
    if let Some(opts) = &spec.options {
        if let Some(OptionLiteral::Bool(_)) = opts.first() {
            let b: Vec<bool> = opts
                .iter()
                .filter_map(|o| match o {
                    OptionLiteral::Bool(b) => Some(*b),
                    OptionLiteral::Text(_) => None,
                })
                .collect();
            return AnswerValue::Flag(b.choose(rng).copied().unwrap_or(false));
        }
    }
    match spec.answer_type {
        AnswerType::TextList => {
            let opts = spec.text_options();
            let k = (spec.answer_min.max(1) as usize).min(opts.len());
            let mut idx: Vec<usize> = rand::seq::index::sample(rng, opts.len(), k).into_iter().collect();
            idx.sort_unstable();
            AnswerValue::TextList(idx.into_iter().map(|i| opts[i].to_owned()).collect())
        }
        _ => AnswerValue::Text(pick(rng, spec).to_owned()),
    }
}

fn gold_record<R: Rng>(schema: &Schema, d: &Draw, rng: &mut R) -> MetadataRecord {
    let lang = schema.category.language_name();
    let mut rec = MetadataRecord::defaults(schema);
    for spec in &schema.attributes {
        let name = spec.name.as_str();
        let text = |s: String| AnswerValue::Text(fit_words(&s, spec));
        let value = match name {
            "Name" => text(d.name.clone()),
            "Tasks" => AnswerValue::TextList(alloc::vec![d.task.clone()]),
            "Unit" => AnswerValue::Text(d.unit.clone()),
            "Collection Style" => AnswerValue::TextList(alloc::vec![d.style.clone()]),
            "Domain" => AnswerValue::TextList(alloc::vec![d.domain.clone()]),
            "Volume" => AnswerValue::Number(d.volume as f64),
            "Year" => AnswerValue::Year(d.year),
            "Link" => AnswerValue::Url(d.link.clone()),
            "HF Link" => AnswerValue::Url(d.hf_link.clone().unwrap_or_default()),
            "License" => AnswerValue::Text(d.license.clone().unwrap_or_else(|| "unknown".into())),
            "Provider" => AnswerValue::TextList(d.provider.iter().cloned().collect()),
            "Authors" => AnswerValue::TextList(AUTHORS.iter().map(|a| a.to_string()).collect()),
            "Affiliations" => AnswerValue::TextList(alloc::vec![AFFILIATION.to_owned()]),
            "Paper Title" => text(format!("{}: A {} dataset for {}", d.name, d.task, lang)),
            "Description" => text(format!("{} is a {} {} dataset.", d.name, lang, d.task)),
            "Abstract" => text(format!(
                "We present {}, a {} {} dataset that contains {} {}.",
                d.name, lang, d.task, d.volume, d.unit
            )),
            "Paper Link" => text("https://arxiv.org/abs/2401.00001".into()),
            "Venue Title" => text("Synthetic Data Workshop".into()),
            "Host" if spec.text_options().contains(&"GitHub") => AnswerValue::Text("GitHub".into()),
            "Access" if spec.text_options().contains(&"Free") => AnswerValue::Text("Free".into()),
            "Language" if schema.category != Category::Multi => {
                let code = schema.category.code();
                if spec.text_options().contains(&code) {
                    AnswerValue::Text(code.to_owned())
                } else {
                    sample_options(rng, spec)
                }
            }
            "Language" if !d.languages.is_empty() => {
                AnswerValue::TextList(d.languages.iter().map(|(l, _)| l.clone()).collect())
            }
            "Subsets" => match &spec.answer_type {
                AnswerType::KeyedRecordList(keys) if !d.languages.is_empty() => AnswerValue::KeyedRecordList(
                    d.languages
                        .iter()
                        .map(|(l, v)| {
                            let cells = keys.iter().map(|k| {
                                let cell = match k.as_str() {
                                    "Name" => Scalar::Text(format!("{}-{}", d.name, l)),
                                    "Volume" => Scalar::Number(*v as f64),
                                    "Unit" => Scalar::Text(d.unit.clone()),
                                    "Language" => Scalar::Text(l.clone()),
                                    _ => Scalar::Text(String::new()),
                                };
                                (k.clone(), cell)
                            });
                            KeyedRow(cells.collect())
                        })
                        .collect(),
                ),
                _ => default_answer(spec),
            },
            _ if spec.options.is_some() => sample_options(rng, spec),
            _ => filler(spec, d),
        };
        rec.set(name, value);
    }
    rec
}

fn filler(spec: &AttributeSpec, d: &Draw) -> AnswerValue {
    match spec.answer_type {
        AnswerType::Text => AnswerValue::Text(fit_words(if spec.answer_min == 0 { "" } else { "not stated" }, spec)),
        AnswerType::Url if spec.answer_min > 0 => AnswerValue::Url(d.link.clone()),
        AnswerType::Year if spec.answer_min > 0 => AnswerValue::Year(d.year),
        AnswerType::Number => AnswerValue::Number(d.volume as f64),
        AnswerType::TextList => AnswerValue::TextList(
            (0..spec.answer_min).map(|i| format!("item {}", i + 1)).collect(),
        ),
        _ => default_answer(spec),
    }
}
