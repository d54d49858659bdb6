use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    /// Chat-completions URL; `None` selects the mock.
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    /// Extra attempts after a transient failure.
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "default".into(),
            api_key: None,
            timeout_ms: 20_000,
            max_retries: 2,
            backoff_ms: 200,
            max_backoff_ms: 2_000,
            max_in_flight: 4,
        }
    }
}

impl GatewayConfig {
    /// Reads `LLM_ENDPOINT`, `LLM_MODEL`, `LLM_API_KEY` and `LLM_TIMEOUT_MS`
    /// over `self`.
    pub fn with_env(self) -> Result<Self, GatewayError> {
        let vars: HashMap<String, String> = std::env::vars().collect();
        self.with_vars(&vars)
    }

    pub fn with_vars(mut self, vars: &HashMap<String, String>) -> Result<Self, GatewayError> {
        if let Some(v) = vars.get("LLM_ENDPOINT").filter(|v| !v.trim().is_empty()) {
            self.endpoint = Some(v.trim().to_string());
        }
        if let Some(v) = vars.get("LLM_MODEL").filter(|v| !v.trim().is_empty()) {
            self.model = v.trim().to_string();
        }
        if let Some(v) = vars.get("LLM_API_KEY").filter(|v| !v.is_empty()) {
            self.api_key = Some(v.clone());
        }
        if let Some(v) = vars.get("LLM_TIMEOUT_MS") {
            self.timeout_ms = v
                .trim()
                .parse()
                .map_err(|_| GatewayError::Config(format!("LLM_TIMEOUT_MS={v:?} is not a number of milliseconds")))?;
        }
        Ok(self)
    }
}
