//! The LLM boundary. Every reply, mock or remote, goes through the same
//! envelope validation before a typed payload leaves this crate.

mod config;
mod envelope;
mod mock;
mod prompt;
mod remote;

pub use config::GatewayConfig;
pub use envelope::{validate_response, Payload, ENVELOPE_SCHEMA};
pub use mock::{mock_rules, MockClient, MockRule, RuleAction};
pub use prompt::{build_prompt, prompt_length_bound, PROMPT_BASE_CHARS, PROMPT_PER_BLOCK_CHARS};
pub use remote::RemoteClient;

use bci_core::intent::{DeviceCatalog, Domain, SchemaIssue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    /// Which devices and functions fit the user's intent; a task plan or a
    /// clarification are also acceptable answers.
    ParadigmPlan,
    /// A step-by-step plan for a robot domain.
    TaskPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum RequestContext {
    Catalog(DeviceCatalog),
    Domain(Domain),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub kind: RequestKind,
    pub user_text: String,
    pub language: String,
    pub context: RequestContext,
    pub max_blocks: usize,
}

impl LlmRequest {
    pub fn paradigm(user_text: &str, language: &str, catalog: DeviceCatalog, max_blocks: usize) -> Self {
        Self {
            kind: RequestKind::ParadigmPlan,
            user_text: user_text.to_string(),
            language: language.to_string(),
            context: RequestContext::Catalog(catalog),
            max_blocks,
        }
    }

    pub fn task(user_text: &str, language: &str, domain: Domain, max_blocks: usize) -> Self {
        Self {
            kind: RequestKind::TaskPlan,
            user_text: user_text.to_string(),
            language: language.to_string(),
            context: RequestContext::Domain(domain),
            max_blocks,
        }
    }

    pub fn catalog(&self) -> Option<&DeviceCatalog> {
        match &self.context {
            RequestContext::Catalog(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub payload: Payload,
    /// The reply text the payload was validated from.
    pub raw: String,
    pub provider: Provider,
    /// 1, or 2 when a re-prompt was needed.
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("request has no text")]
    EmptyRequest,
    #[error("invalid reply: {}", .issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Schema { issues: Vec<SchemaIssue>, raw: String },
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        match self {
            Self::Network(_) | Self::Timeout(_) => true,
            Self::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Something that turns a conversation into reply text.
pub trait LlmClient: Send + Sync {
    fn provider(&self) -> Provider;
    fn complete(&self, req: &LlmRequest, messages: &[ChatMessage]) -> Result<String, GatewayError>;
}

fn reprompt_text(err: &GatewayError) -> String {
    format!(
        "Your previous reply could not be used ({err}). Reply again with a single JSON object that matches the schema, and nothing else."
    )
}

/// Prompts the client, validates the reply, and re-prompts once on a schema
/// failure.
pub fn infer(client: &dyn LlmClient, req: &LlmRequest) -> Result<LlmResponse, GatewayError> {
    if req.user_text.trim().is_empty() {
        return Err(GatewayError::EmptyRequest);
    }
    let mut messages = vec![ChatMessage::new(Role::User, build_prompt(req))];
    let raw = client.complete(req, &messages)?;
    let first = match validate_response(&raw, req) {
        Ok(payload) => {
            return Ok(LlmResponse {
                payload,
                raw,
                provider: client.provider(),
                attempts: 1,
            })
        }
        Err(e) => e,
    };
    messages.push(ChatMessage::new(Role::Assistant, raw));
    messages.push(ChatMessage::new(Role::User, reprompt_text(&first)));
    let raw = client.complete(req, &messages)?;
    let payload = validate_response(&raw, req)?;
    Ok(LlmResponse {
        payload,
        raw,
        provider: client.provider(),
        attempts: 2,
    })
}

/// Remote client when an endpoint is configured, mock otherwise.
pub fn client_from_config(config: &GatewayConfig) -> Result<Box<dyn LlmClient>, GatewayError> {
    match &config.endpoint {
        Some(_) => Ok(Box::new(RemoteClient::new(config.clone())?)),
        None => Ok(Box::new(MockClient::new())),
    }
}
