use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use crate::{ChatMessage, GatewayConfig, GatewayError, LlmClient, LlmRequest, Provider};

/// Chat-completions client: `POST {endpoint}` with `{model, messages}`, reply
/// text read from `choices[0].message.content`.
pub struct RemoteClient {
    config: GatewayConfig,
    endpoint: String,
    agent: Agent,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

struct Slot<'a>(&'a RemoteClient);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.slot_freed.notify_one();
    }
}

impl RemoteClient {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let endpoint = config
            .endpoint
            .clone()
            .filter(|e| e.starts_with("http://") || e.starts_with("https://"))
            .ok_or_else(|| GatewayError::Config("endpoint must be an http(s) URL".into()))?;
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            endpoint,
            agent,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        })
    }

    fn acquire(&self) -> Slot<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.config.max_in_flight {
            n = self.slot_freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Slot(self)
    }

    fn attempt(&self, body: &Value) -> Result<String, GatewayError> {
        let mut request = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| self.classify(e))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| self.classify(e))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Http {
                status,
                body: text.chars().take(500).collect(),
            });
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Network(format!("provider reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Network("provider reply has no choices[0].message.content".into()))
    }

    fn classify(&self, e: ureq::Error) -> GatewayError {
        match e {
            ureq::Error::Timeout(_) => GatewayError::Timeout(self.config.timeout_ms),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                GatewayError::Timeout(self.config.timeout_ms)
            }
            other => GatewayError::Network(other.to_string()),
        }
    }

    /// Delay before retry number `n` (1-based): doubling from `backoff_ms`,
    /// capped at `max_backoff_ms`.
    pub fn backoff(&self, n: u32) -> Duration {
        let ms = self
            .config
            .backoff_ms
            .saturating_mul(1u64 << (n.saturating_sub(1)).min(20))
            .min(self.config.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

impl LlmClient for RemoteClient {
    fn provider(&self) -> Provider {
        Provider::Remote
    }

    fn complete(&self, _req: &LlmRequest, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        let _slot = self.acquire();
        let mut retry = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if e.is_transient() && retry < self.config.max_retries => {
                    retry += 1;
                    std::thread::sleep(self.backoff(retry));
                }
                other => return other,
            }
        }
    }
}
