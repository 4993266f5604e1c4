//! Chat-completion gateway: wire format, retry loop and token accounting.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::prompt::{Message, MessageSequence};

/// Delay between consecutive attempts of one logical call.
pub const RETRY_DELAY: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub model_id: String,
    pub endpoint_url: String,
    pub temperature: f64,
    pub max_attempts: u32,
    pub api_key_env: String,
    /// Seconds.
    pub request_timeout: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_id: String::new(),
            endpoint_url: String::new(),
            temperature: 0.0,
            max_attempts: 6,
            api_key_env: "MOLE_API_KEY".to_owned(),
            request_timeout: 300,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("max_attempts must be at least 1")]
    MaxAttempts,
    #[error("temperature must be a non-negative number, got {0}")]
    Temperature(f64),
}

impl ModelConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        ModelConfig {
            model_id: model_id.into(),
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_attempts == 0 {
            return Err(ConfigError::MaxAttempts);
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [Message],
    pub temperature: f64,
}

impl<'a> ChatRequest<'a> {
    pub fn new(messages: &'a MessageSequence, cfg: &'a ModelConfig) -> Self {
        ChatRequest {
            model: &cfg.model_id,
            messages: messages.messages(),
            temperature: cfg.temperature,
        }
    }

    /// Request body as sent on the wire.
    pub fn to_body(&self) -> String {
        serde_json::to_string(self).expect("request serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChatReply {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl ChatReply {
    /// Reads `choices[0].message.content` and `usage`; missing usage counts as 0.
    pub fn from_response_body(body: &str) -> Result<ChatReply, Failure> {
        let v: Value = serde_json::from_str(body).map_err(|e| Failure::Malformed(e.to_string()))?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::Malformed("missing choices[0].message.content".to_owned()))?;
        let tokens = |key: &str| v.get("usage").and_then(|u| u.get(key)).and_then(Value::as_u64).unwrap_or(0);
        Ok(ChatReply {
            content: content.to_owned(),
            input_tokens: tokens("prompt_tokens"),
            output_tokens: tokens("completion_tokens"),
        })
    }
}

/// Why one attempt failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Transport(String),
    Status(u16),
    Malformed(String),
    Rejected(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Transport(e) => write!(f, "transport error: {e}"),
            Failure::Status(s) => write!(f, "non-2xx status {s}"),
            Failure::Malformed(e) => write!(f, "malformed response: {e}"),
            Failure::Rejected(e) => write!(f, "output rejected: {e}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid model config: {0}")]
    Config(#[from] ConfigError),
    #[error("all {attempts} attempts failed; last: {last}")]
    Exhausted { attempts: u32, last: Failure },
}

/// One round trip to a chat-completion endpoint.
pub trait ChatBackend {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure> {
        (**self).send(request, cfg)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for alloc::boxed::Box<B> {
    fn send(&self, request: &ChatRequest<'_>, cfg: &ModelConfig) -> Result<ChatReply, Failure> {
        (**self).send(request, cfg)
    }
}

pub trait Sleep {
    fn sleep(&self, d: Duration);
}

/// Sleeper that only records requested delays.
#[derive(Debug, Default)]
pub struct FakeClock {
    slept: RefCell<Vec<Duration>>,
}

impl FakeClock {
    pub fn total(&self) -> Duration {
        self.slept.borrow().iter().sum()
    }

    pub fn calls(&self) -> usize {
        self.slept.borrow().len()
    }
}

impl Sleep for FakeClock {
    fn sleep(&self, d: Duration) {
        self.slept.borrow_mut().push(d);
    }
}

impl<S: Sleep + ?Sized> Sleep for &S {
    fn sleep(&self, d: Duration) {
        (**self).sleep(d)
    }
}

/// Receives token usage for every attempt.
pub trait UsageSink {
    fn record(&self, model: &str, input_tokens: u64, output_tokens: u64);
}

impl UsageSink for RefCell<CostLedger> {
    fn record(&self, model: &str, input_tokens: u64, output_tokens: u64) {
        self.borrow_mut().add(model, input_tokens, output_tokens);
    }
}

impl<U: UsageSink + ?Sized> UsageSink for &U {
    fn record(&self, model: &str, input_tokens: u64, output_tokens: u64) {
        (**self).record(model, input_tokens, output_tokens)
    }
}

/// Discards usage.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoUsage;

impl UsageSink for NoUsage {
    fn record(&self, _: &str, _: u64, _: u64) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub content: String,
    /// Summed over every attempt, including failed ones.
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub attempts_used: u32,
}

pub struct Gateway<B, S, U> {
    pub backend: B,
    pub sleeper: S,
    pub usage: U,
}

impl<B: ChatBackend, S: Sleep, U: UsageSink> Gateway<B, S, U> {
    pub fn new(backend: B, sleeper: S, usage: U) -> Self {
        Gateway { backend, sleeper, usage }
    }

    /// Sends `messages` until `is_success` accepts the content or
    /// `cfg.max_attempts` requests have been made.
    pub fn complete_with_retry<F>(
        &self,
        messages: &MessageSequence,
        cfg: &ModelConfig,
        mut is_success: F,
    ) -> Result<CompletionResult, GatewayError>
    where
        F: FnMut(&str) -> Result<(), String>,
    {
        cfg.validate()?;
        let request = ChatRequest::new(messages, cfg);
        let (mut input_tokens, mut output_tokens) = (0, 0);
        let mut last = Failure::Transport("no attempt made".to_owned());
        for attempt in 1..=cfg.max_attempts {
            if attempt > 1 {
                self.sleeper.sleep(RETRY_DELAY);
            }
            match self.backend.send(&request, cfg) {
                Ok(reply) => {
                    self.usage.record(&cfg.model_id, reply.input_tokens, reply.output_tokens);
                    input_tokens += reply.input_tokens;
                    output_tokens += reply.output_tokens;
                    match is_success(&reply.content) {
                        Ok(()) => {
                            return Ok(CompletionResult {
                                content: reply.content,
                                input_tokens,
                                output_tokens,
                                attempts_used: attempt,
                            })
                        }
                        Err(why) => last = Failure::Rejected(why),
                    }
                }
                Err(f) => last = f,
            }
        }
        Err(GatewayError::Exhausted {
            attempts: cfg.max_attempts,
            last,
        })
    }
}

/// Model id to USD per million `(input, output)` tokens.
pub type PriceTable = Vec<(String, (f64, f64))>;

/// Accumulated tokens per model plus USD prices per million tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostLedger {
    usage: Vec<(String, u64, u64)>,
    prices: Vec<(String, (f64, f64))>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub model: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// `None` when the price table has no entry for the model.
    pub usd: Option<f64>,
}

impl CostLedger {
    pub fn new() -> Self {
        CostLedger::default()
    }

    pub fn with_prices(prices: impl IntoIterator<Item = (String, (f64, f64))>) -> Self {
        CostLedger {
            usage: Vec::new(),
            prices: prices.into_iter().collect(),
        }
    }

    /// Parses a price table `{"model": [usd_per_1m_in, usd_per_1m_out]}`.
    pub fn parse_prices(raw: &str) -> Result<PriceTable, String> {
        let v: Value = serde_json::from_str(raw).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("price table must be a JSON object")?;
        obj.iter()
            .map(|(k, v)| {
                let pair = v.as_array().filter(|a| a.len() == 2);
                let nums = pair.and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)));
                match nums {
                    Some((i, o)) if i >= 0.0 && o >= 0.0 => Ok((k.clone(), (i, o))),
                    _ => Err(alloc::format!("price for `{k}` must be [input, output] non-negative numbers")),
                }
            })
            .collect()
    }

    pub fn set_price(&mut self, model: &str, input_per_m: f64, output_per_m: f64) {
        match self.prices.iter_mut().find(|(m, _)| m == model) {
            Some((_, p)) => *p = (input_per_m, output_per_m),
            None => self.prices.push((model.to_owned(), (input_per_m, output_per_m))),
        }
    }

    pub fn add(&mut self, model: &str, input_tokens: u64, output_tokens: u64) {
        match self.usage.iter_mut().find(|(m, _, _)| m == model) {
            Some((_, i, o)) => {
                *i += input_tokens;
                *o += output_tokens;
            }
            None => self.usage.push((model.to_owned(), input_tokens, output_tokens)),
        }
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for (m, i, o) in &other.usage {
            self.add(m, *i, *o);
        }
    }

    pub fn tokens(&self, model: &str) -> Option<(u64, u64)> {
        self.usage.iter().find(|(m, _, _)| m == model).map(|(_, i, o)| (*i, *o))
    }

    pub fn price(&self, model: &str) -> Option<(f64, f64)> {
        self.prices.iter().find(|(m, _)| m == model).map(|(_, p)| *p)
    }

    /// Sum of known row costs; `None` if any model lacks a price.
    pub fn total_usd(&self) -> Option<f64> {
        estimate_cost(self).iter().map(|r| r.usd).sum()
    }
}

pub fn estimate_cost(ledger: &CostLedger) -> Vec<CostRow> {
    ledger
        .usage
        .iter()
        .map(|(model, i, o)| CostRow {
            model: model.clone(),
            input_tokens: *i,
            output_tokens: *o,
            usd: ledger
                .price(model)
                .map(|(pi, po)| *i as f64 * pi / 1e6 + *o as f64 * po / 1e6),
        })
        .collect()
}

/// Backend replaying a fixed list of replies and capturing request bodies.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: RefCell<Vec<Result<ChatReply, Failure>>>,
    requests: RefCell<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = Result<ChatReply, Failure>>) -> Self {
        let mut replies: Vec<_> = replies.into_iter().collect();
        replies.reverse();
        ScriptedBackend {
            replies: RefCell::new(replies),
            requests: RefCell::new(Vec::new()),
        }
    }

    pub fn texts<'a>(contents: impl IntoIterator<Item = &'a str>) -> Self {
        ScriptedBackend::new(contents.into_iter().map(|c| {
            Ok(ChatReply {
                content: c.to_owned(),
                input_tokens: 100,
                output_tokens: 10,
            })
        }))
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.borrow().clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.borrow().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest<'_>, _: &ModelConfig) -> Result<ChatReply, Failure> {
        self.requests.borrow_mut().push(request.to_body());
        self.replies
            .borrow_mut()
            .pop()
            .unwrap_or_else(|| Err(Failure::Transport("script exhausted".to_owned())))
    }
}
