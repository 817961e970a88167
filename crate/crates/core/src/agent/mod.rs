//! The two-step choose/run conversation with a language model.

mod client;
mod prompts;
mod rundir;
mod runner;

use serde::{Deserialize, Serialize};

pub use client::{
    estimate_tokens, CannedTurn, HttpClient, LlmClient, LlmError, ReplayClient, ReqwestTransport, Transcript, Transport,
};
pub use prompts::{build_prompt, fill_template, MissingContextField, PromptContext, PromptKind};
pub use rundir::write_run_dir;
pub use runner::{run_trajectory, ActionRecord, ActionVerdict, AgentError, Budget, RunReport, Session, Task, TurnOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
    #[serde(default)]
    pub reasoning_tokens: u64,
    /// USD
    #[serde(default)]
    pub cost: f64,
}

impl ChatTurn {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Self { role, text: text.into(), tokens_in: 0, tokens_out: 0, reasoning_tokens: 0, cost: 0.0 }
    }
}

/// How the model exposes its reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReasoningMode {
    /// The model reasons internally and answers directly.
    #[default]
    Native,
    /// The model writes its reasoning between two tags.
    Delimited { open_tag: String, close_tag: String },
}

impl ReasoningMode {
    pub fn delimited(open: &str, close: &str) -> Self {
        ReasoningMode::Delimited { open_tag: open.into(), close_tag: close.into() }
    }

    pub fn delimiters(&self) -> Option<(&str, &str)> {
        match self {
            ReasoningMode::Native => None,
            ReasoningMode::Delimited { open_tag, close_tag } => Some((open_tag, close_tag)),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.delimiters() {
            Some((o, c)) if o.is_empty() || c.is_empty() || o == c => {
                Err("reasoning delimiters must be non-empty and distinct".into())
            }
            _ => Ok(()),
        }
    }
}

fn default_api_key_env() -> String {
    "RSGYM_API_KEY".into()
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    /// Model identifier sent to the endpoint.
    pub model: String,
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub reasoning: ReasoningMode,
    /// Extra request fields such as `temperature`.
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    /// USD per million input tokens.
    #[serde(default)]
    pub price_in: f64,
    /// USD per million output tokens.
    #[serde(default)]
    pub price_out: f64,
}

impl ModelProfile {
    pub fn replay(reasoning: ReasoningMode) -> Self {
        Self {
            model: "replay".into(),
            endpoint: default_endpoint(),
            api_key_env: default_api_key_env(),
            reasoning,
            params: Default::default(),
            price_in: 0.0,
            price_out: 0.0,
        }
    }

    pub fn cost(&self, tokens_in: u64, tokens_out: u64) -> f64 {
        (tokens_in as f64 * self.price_in + tokens_out as f64 * self.price_out) / 1e6
    }

    pub fn delimiter_pairs(&self) -> Vec<(String, String)> {
        self.reasoning.delimiters().map(|(o, c)| vec![(o.to_string(), c.to_string())]).unwrap_or_default()
    }
}
