//! Second extraction pass fed with the dataset's hosting page.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::document::Document;
use crate::extract::{complete_record, ExtractError, ExtractionRun, Strategy};
use crate::gateway::{ChatBackend, Gateway, ModelConfig, Sleep, UsageSink};
use crate::prompt::{build_system_prompt, user_message, MessageSequence, Role};
use crate::schema::Schema;
use crate::validate::{is_well_formed_url, MetadataRecord};
use crate::value::AnswerValue;

pub const BROWSE_INSTRUCTION: &str = include_str!("../fixtures/prompts/browse.txt");

/// Bytes kept from each fetched resource.
pub const FETCH_CAP: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HostClass {
    GitHub,
    HuggingFace,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchPlan {
    pub host_class: HostClass,
    pub fetch_urls: Vec<String>,
    pub source_link: String,
}

impl FetchPlan {
    pub fn is_empty(&self) -> bool {
        self.fetch_urls.is_empty()
    }
}

/// Plain GET of a URL returning the body as text.
pub trait Fetcher {
    fn fetch(&self, url: &str) -> Result<String, String>;
}

impl<F: Fetcher + ?Sized> Fetcher for &F {
    fn fetch(&self, url: &str) -> Result<String, String> {
        (**self).fetch(url)
    }
}

impl<F: Fetcher + ?Sized> Fetcher for alloc::boxed::Box<F> {
    fn fetch(&self, url: &str) -> Result<String, String> {
        (**self).fetch(url)
    }
}

/// Fetcher that always fails; browsing then returns the prior unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoFetch;

impl Fetcher for NoFetch {
    fn fetch(&self, url: &str) -> Result<String, String> {
        Err(format!("fetching disabled for {url}"))
    }
}

fn split_url(link: &str) -> Option<(String, Vec<&str>)> {
    let rest = link.split_once("://")?.1;
    let end = rest.find(['?', '#']).unwrap_or(rest.len());
    let mut parts = rest[..end].split('/');
    let host = parts.next()?.to_lowercase();
    let host = host.strip_prefix("www.").map(str::to_owned).unwrap_or(host);
    Some((host, parts.filter(|p| !p.is_empty()).collect()))
}

pub fn plan_fetch(link: &str) -> FetchPlan {
    let link = link.trim();
    let mut plan = FetchPlan {
        host_class: HostClass::Other,
        fetch_urls: Vec::new(),
        source_link: link.to_owned(),
    };
    if !is_well_formed_url(link) {
        return plan;
    }
    let Some((host, path)) = split_url(link) else {
        return plan;
    };
    match (host.as_str(), path.as_slice()) {
        ("github.com", [user, repo, ..]) => {
            let repo = repo.strip_suffix(".git").unwrap_or(repo);
            plan.host_class = HostClass::GitHub;
            plan.fetch_urls = ["HEAD", "main", "master"]
                .iter()
                .map(|b| format!("https://raw.githubusercontent.com/{user}/{repo}/{b}/README.md"))
                .collect();
        }
        ("huggingface.co", ["datasets", id @ ..]) if !id.is_empty() => {
            let id = if id.len() >= 2 { format!("{}/{}", id[0], id[1]) } else { id[0].to_owned() };
            plan.host_class = HostClass::HuggingFace;
            plan.fetch_urls = alloc::vec![format!("https://huggingface.co/datasets/{id}/resolve/main/README.md")];
        }
        _ => plan.fetch_urls = alloc::vec![link.to_owned()],
    }
    plan
}

/// Longest prefix of `s` with at most `cap` bytes ending on a char boundary.
pub fn cap_bytes(s: &str, cap: usize) -> &str {
    if s.len() <= cap {
        return s;
    }
    let mut end = cap;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

fn url_of(record: &MetadataRecord, name: &str) -> Option<String> {
    match record.get(name) {
        Some(AnswerValue::Url(u)) | Some(AnswerValue::Text(u)) if !u.trim().is_empty() => Some(u.clone()),
        _ => None,
    }
}

/// Plans for the record's `Link` and `HF Link`, skipping duplicates and empty plans.
pub fn plans_for(record: &MetadataRecord) -> Vec<FetchPlan> {
    let mut plans: Vec<FetchPlan> = Vec::new();
    for name in ["Link", "HF Link"] {
        let Some(link) = url_of(record, name) else { continue };
        let plan = plan_fetch(&link);
        if !plan.is_empty() && !plans.iter().any(|p| p.fetch_urls == plan.fetch_urls) {
            plans.push(plan);
        }
    }
    plans
}

/// First successful candidate of each plan, as `(url, capped body)`.
pub fn fetch_pages<F: Fetcher>(plans: &[FetchPlan], fetcher: &F, warnings: &mut Vec<String>) -> Vec<(String, String)> {
    let mut pages = Vec::new();
    for plan in plans {
        let hit = plan.fetch_urls.iter().find_map(|u| match fetcher.fetch(u) {
            Ok(body) => Some((u.clone(), String::from(cap_bytes(&body, FETCH_CAP)))),
            Err(e) => {
                warnings.push(format!("fetch {u}: {e}"));
                None
            }
        });
        pages.extend(hit);
    }
    pages
}

pub fn build_browse_request(
    schema: &Schema,
    doc: &Document,
    prior: &MetadataRecord,
    pages: &[(String, String)],
) -> MessageSequence {
    let mut seq = MessageSequence::new(build_system_prompt(schema));
    seq.push(Role::User, user_message(&schema.prompt_text(), doc.text()));
    seq.push(Role::Assistant, prior.to_json_string());
    let mut follow = String::from(BROWSE_INSTRUCTION.trim_end());
    for (url, body) in pages {
        follow.push_str(&format!("\n\nPage: {url}\n{body}"));
    }
    seq.push(Role::User, follow);
    seq
}

pub fn extract_with_browsing<B: ChatBackend, S: Sleep, U: UsageSink, F: Fetcher>(
    gateway: &Gateway<B, S, U>,
    doc: &Document,
    schema: &Schema,
    prior: &MetadataRecord,
    cfg: &ModelConfig,
    fetcher: &F,
) -> Result<ExtractionRun, ExtractError> {
    let mut run = ExtractionRun {
        document_id: doc.id.clone(),
        strategy: Strategy::Llm,
        model_id: Some(cfg.model_id.clone()),
        shots: 0,
        fraction: 1.0,
        record: prior.clone(),
        log: Default::default(),
        attempts_used: 0,
        input_tokens: 0,
        output_tokens: 0,
        timestamp: None,
        warnings: Vec::new(),
    };
    let plans = plans_for(prior);
    if plans.is_empty() {
        run.warnings.push("browse: no link to fetch; prior kept".to_owned());
        return Ok(run);
    }
    let pages = fetch_pages(&plans, fetcher, &mut run.warnings);
    if pages.is_empty() {
        run.warnings.push("browse: every fetch failed; prior kept".to_owned());
        return Ok(run);
    }
    let messages = build_browse_request(schema, doc, prior, &pages);
    let (record, log, result) = complete_record(gateway, &messages, schema, cfg)?;
    run.record = record;
    run.log = log;
    run.attempts_used = result.attempts_used;
    run.input_tokens = result.input_tokens;
    run.output_tokens = result.output_tokens;
    Ok(run)
}
