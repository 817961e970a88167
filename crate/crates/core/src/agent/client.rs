//! Language-model clients: canned replay and an HTTP chat-completion endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatTurn, ModelProfile, Role};
use crate::action::strip_reasoning;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("provider returned {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("replay transcript exhausted after {0} turns")]
    ReplayExhausted(usize),
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredentials(String),
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, messages: &[ChatTurn], profile: &ModelProfile) -> Result<ChatTurn, LlmError>;
}

/// Rough token count: one token per four characters.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Share of `tokens_out` spent on delimited reasoning, by character count.
fn delimited_share(text: &str, profile: &ModelProfile, tokens_out: u64) -> u64 {
    if profile.reasoning.delimiters().is_none() {
        return 0;
    }
    let total = text.chars().count();
    if total == 0 {
        return 0;
    }
    let visible = strip_reasoning(text, &profile.delimiter_pairs()).chars().count();
    let hidden = total.saturating_sub(visible) as f64;
    (tokens_out as f64 * hidden / total as f64).round() as u64
}

fn assistant_turn(text: String, tokens_in: u64, tokens_out: u64, reasoning: u64, profile: &ModelProfile) -> Result<ChatTurn, LlmError> {
    if reasoning > tokens_out {
        return Err(LlmError::Provider {
            status: 200,
            body: format!("reasoning tokens {reasoning} exceed output tokens {tokens_out}"),
        });
    }
    Ok(ChatTurn { role: Role::Assistant, text, tokens_in, tokens_out, reasoning_tokens: reasoning, cost: profile.cost(tokens_in, tokens_out) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedTurn {
    pub text: String,
    /// Hidden reasoning tokens, for models that reason natively.
    #[serde(default)]
    pub reasoning_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub responses: Vec<CannedTurn>,
}

/// Returns canned responses in order with synthesized token accounting.
#[derive(Debug)]
pub struct ReplayClient {
    responses: Vec<CannedTurn>,
    next: Mutex<usize>,
}

impl ReplayClient {
    pub fn new(transcript: Transcript) -> Self {
        Self { responses: transcript.responses, next: Mutex::new(0) }
    }

    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(Transcript { responses: texts.into_iter().map(|t| CannedTurn { text: t.into(), reasoning_tokens: 0 }).collect() })
    }

    pub fn served(&self) -> usize {
        *self.next.lock().expect("replay lock")
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, messages: &[ChatTurn], profile: &ModelProfile) -> Result<ChatTurn, LlmError> {
        let mut next = self.next.lock().expect("replay lock");
        let canned = self.responses.get(*next).ok_or(LlmError::ReplayExhausted(self.responses.len()))?;
        *next += 1;
        let tokens_in: u64 = messages.iter().map(|m| estimate_tokens(&m.text)).sum();
        let visible = estimate_tokens(&canned.text);
        let tokens_out = visible + canned.reasoning_tokens;
        let reasoning = canned.reasoning_tokens + delimited_share(&canned.text, profile, visible);
        assistant_turn(canned.text.clone(), tokens_in, tokens_out, reasoning, profile)
    }
}

/// Sends one JSON request and returns the status code and body.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<(u16, String), String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<(u16, String), String> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

/// Chat-completion client with bounded exponential backoff on transport
/// failures, 429 and 5xx responses.
pub struct HttpClient<T: Transport> {
    transport: T,
    pub max_retries: usize,
    pub base_delay: Duration,
    retries: AtomicUsize,
}

impl<T: Transport> HttpClient<T> {
    pub fn new(transport: T) -> Self {
        Self { transport, max_retries: 3, base_delay: Duration::from_millis(500), retries: AtomicUsize::new(0) }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Retries performed so far across all calls.
    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }

    fn request_body(messages: &[ChatTurn], profile: &ModelProfile) -> Value {
        let msgs: Vec<Value> = messages.iter().map(|m| json!({"role": m.role.as_str(), "content": m.text})).collect();
        let mut body = json!({"model": profile.model, "messages": msgs});
        for (k, v) in &profile.params {
            body[k] = v.clone();
        }
        body
    }

    fn parse(status: u16, body: &str, messages: &[ChatTurn], profile: &ModelProfile) -> Result<ChatTurn, LlmError> {
        let bad = || LlmError::Provider { status, body: body.to_string() };
        let v: Value = serde_json::from_str(body).map_err(|_| bad())?;
        let text = v["choices"][0]["message"]["content"].as_str().ok_or_else(bad)?.to_string();
        let usage = &v["usage"];
        let tokens_in = usage["prompt_tokens"].as_u64().unwrap_or_else(|| messages.iter().map(|m| estimate_tokens(&m.text)).sum());
        let tokens_out = usage["completion_tokens"].as_u64().unwrap_or_else(|| estimate_tokens(&text));
        let hidden = usage["completion_tokens_details"]["reasoning_tokens"].as_u64().unwrap_or(0);
        let reasoning = hidden + delimited_share(&text, profile, tokens_out.saturating_sub(hidden));
        assistant_turn(text, tokens_in, tokens_out, reasoning, profile)
    }
}

impl<T: Transport> LlmClient for HttpClient<T> {
    fn complete(&self, messages: &[ChatTurn], profile: &ModelProfile) -> Result<ChatTurn, LlmError> {
        let key = std::env::var(&profile.api_key_env).map_err(|_| LlmError::MissingCredentials(profile.api_key_env.clone()))?;
        let url = format!("{}/chat/completions", profile.endpoint.trim_end_matches('/'));
        let body = Self::request_body(messages, profile);
        let mut attempt = 0;
        loop {
            let outcome = self.transport.post_json(&url, Some(&key), &body);
            let retryable = match &outcome {
                Ok((status, _)) => *status == 429 || *status >= 500,
                Err(_) => true,
            };
            if !retryable {
                let (status, text) = outcome.expect("non-retryable outcomes are responses");
                if !(200..300).contains(&status) {
                    return Err(LlmError::Provider { status, body: text });
                }
                return Self::parse(status, &text, messages, profile);
            }
            if attempt == self.max_retries {
                return Err(match outcome {
                    Ok((status, body)) => LlmError::Provider { status, body },
                    Err(message) => LlmError::Transport { attempts: attempt + 1, message },
                });
            }
            let delay = self.base_delay * 2u32.pow(attempt as u32);
            tracing::warn!(attempt = attempt + 1, ?delay, "retrying chat completion");
            self.retries.fetch_add(1, Ordering::Relaxed);
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ReasoningMode;

    #[test]
    fn replay_serves_in_order_then_exhausts() {
        let c = ReplayClient::from_texts(["a", "b", "c"]);
        let p = ModelProfile::replay(ReasoningMode::Native);
        let msgs = [ChatTurn::new(Role::User, "hello")];
        let got: Vec<String> = (0..3).map(|_| c.complete(&msgs, &p).unwrap().text).collect();
        assert_eq!(got, vec!["a", "b", "c"]);
        assert_eq!(c.complete(&msgs, &p), Err(LlmError::ReplayExhausted(3)));
    }

    #[test]
    fn delimited_reasoning_share() {
        let p = ModelProfile::replay(ReasoningMode::delimited("<think>", "</think>"));
        let c = ReplayClient::from_texts(["<think>abcd</think>xyzw"]);
        let t = c.complete(&[], &p).unwrap();
        assert_eq!(t.tokens_out, 6);
        // 19 of 23 characters are reasoning.
        assert_eq!(t.reasoning_tokens, 5);
    }

    #[test]
    fn hidden_reasoning_counts_as_output() {
        let mut p = ModelProfile::replay(ReasoningMode::Native);
        p.price_out = 2.0;
        let c = ReplayClient::new(Transcript { responses: vec![CannedTurn { text: "abcd".into(), reasoning_tokens: 99 }] });
        let t = c.complete(&[], &p).unwrap();
        assert_eq!((t.tokens_out, t.reasoning_tokens), (100, 99));
        assert!((t.cost - 2e-4).abs() < 1e-15);
    }
}
