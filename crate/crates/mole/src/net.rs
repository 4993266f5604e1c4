//! Concrete transports, the fetch cache and thread-safe gateway plumbing.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use mole_core::browse::Fetcher;
use mole_core::gateway::{ChatBackend, ChatReply, ChatRequest, CostLedger, Failure, ModelConfig, Sleep, UsageSink};
use sha2::{Digest, Sha256};

pub const USER_AGENT: &str = concat!("mole/", env!("CARGO_PKG_VERSION"));

/// Chat backend speaking the common chat-completions wire shape.
pub struct HttpBackend {
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent(USER_AGENT)
            .build();
        HttpBackend { agent: config.into() }
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure> {
        let mut req = self
            .agent
            .post(&cfg.endpoint_url)
            .header("Content-Type", "application/json");
        match std::env::var(&cfg.api_key_env) {
            Ok(key) if !key.is_empty() => req = req.header("Authorization", &format!("Bearer {key}")),
            _ => log::warn!("{} is not set; sending the request without a bearer token", cfg.api_key_env),
        }
        let mut resp = req.send(request.to_body()).map_err(|e| Failure::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Failure::Status(status));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transport(e.to_string()))?;
        ChatReply::from_response_body(&body)
    }
}

/// Plain HTTPS GET.
pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .user_agent(USER_AGENT)
            .build();
        HttpFetcher { agent: config.into() }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        self.agent
            .get(url)
            .call()
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())
    }
}

pub fn cache_key(url: &str) -> String {
    hex::encode(Sha256::digest(url.as_bytes()))
}

/// Serves bodies from `dir/<sha256(url)>` and stores new successful fetches there.
pub struct CachingFetcher<F> {
    dir: PathBuf,
    inner: F,
}

impl<F: Fetcher> CachingFetcher<F> {
    pub fn new(dir: impl Into<PathBuf>, inner: F) -> Self {
        CachingFetcher { dir: dir.into(), inner }
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        self.dir.join(cache_key(url))
    }
}

/// Puts `body` into a fetch cache directory as if it had been fetched from `url`.
pub fn seed_cache(dir: &Path, url: &str, body: &str) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(cache_key(url)), body)
}

impl<F: Fetcher> Fetcher for CachingFetcher<F> {
    fn fetch(&self, url: &str) -> Result<String, String> {
        let path = self.path_for(url);
        if let Ok(body) = fs::read_to_string(&path) {
            return Ok(body);
        }
        let body = self.inner.fetch(url)?;
        if let Err(e) = fs::create_dir_all(&self.dir).and_then(|_| fs::write(&path, &body)) {
            log::warn!("cannot cache {url}: {e}");
        }
        Ok(body)
    }
}

pub struct RealSleep;

impl Sleep for RealSleep {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Cost ledger shared between worker threads.
#[derive(Default)]
pub struct SharedLedger(pub Mutex<CostLedger>);

impl SharedLedger {
    pub fn snapshot(&self) -> CostLedger {
        self.0.lock().expect("ledger lock").clone()
    }
}

impl UsageSink for SharedLedger {
    fn record(&self, model: &str, input_tokens: u64, output_tokens: u64) {
        self.0.lock().expect("ledger lock").add(model, input_tokens, output_tokens);
    }
}

/// Caps the number of requests in flight across threads.
pub struct Limited<B> {
    inner: B,
    max: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

impl<B> Limited<B> {
    pub fn new(inner: B, max: usize) -> Self {
        Limited {
            inner,
            max: max.max(1),
            busy: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

impl<B: ChatBackend> ChatBackend for Limited<B> {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure> {
        {
            let mut busy = self.busy.lock().expect("limit lock");
            while *busy >= self.max {
                busy = self.freed.wait(busy).expect("limit lock");
            }
            *busy += 1;
        }
        let out = self.inner.send(request, cfg);
        *self.busy.lock().expect("limit lock") -= 1;
        self.freed.notify_one();
        out
    }
}

/// Keeps every request body it forwards.
pub struct Recording<B> {
    inner: B,
    bodies: Mutex<Vec<String>>,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording {
            inner,
            bodies: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<String> {
        std::mem::take(&mut *self.bodies.lock().expect("recording lock"))
    }
}

impl<B: ChatBackend> ChatBackend for Recording<B> {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure> {
        self.bodies.lock().expect("recording lock").push(request.to_body());
        self.inner.send(request, cfg)
    }
}

/// Offline backend replaying canned replies for one paper.
///
/// Replies come from `<dir>/<paper_id>.json`, an object with `extract` and
/// optional `browse` arrays of strings. Each call to a stage takes the next
/// reply; the last one repeats. Token counts are `ceil(chars / 4)`.
pub struct ReplayBackend {
    replies: Mutex<Vec<String>>,
}

#[derive(serde::Deserialize)]
struct ReplayFile {
    extract: Vec<String>,
    #[serde(default)]
    browse: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Browse,
}

impl ReplayBackend {
    pub fn new(replies: Vec<String>) -> Self {
        let mut replies = replies;
        replies.reverse();
        ReplayBackend {
            replies: Mutex::new(replies),
        }
    }

    pub fn load(dir: &Path, paper_id: &str, stage: Stage) -> anyhow::Result<Self> {
        let path = dir.join(format!("{paper_id}.json"));
        let raw = fs::read_to_string(&path).map_err(|e| anyhow::anyhow!("mock replies {}: {e}", path.display()))?;
        let file: ReplayFile = serde_json::from_str(&raw).map_err(|e| anyhow::anyhow!("mock replies {}: {e}", path.display()))?;
        Ok(ReplayBackend::new(match stage {
            Stage::Extract => file.extract,
            Stage::Browse => file.browse,
        }))
    }
}

fn approx_tokens(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

impl ChatBackend for ReplayBackend {
    fn send(&self, request: &ChatRequest<'_>, _: &ModelConfig) -> Result<ChatReply, Failure> {
        let mut replies = self.replies.lock().expect("replay lock");
        let content = match replies.len() {
            0 => return Err(Failure::Transport("no mock reply left".into())),
            1 => replies[0].clone(),
            _ => replies.pop().expect("non-empty"),
        };
        let prompt: usize = request.messages.iter().map(|m| m.content.chars().count()).sum();
        Ok(ChatReply {
            input_tokens: (prompt as u64).div_ceil(4),
            output_tokens: approx_tokens(&content),
            content,
        })
    }
}
