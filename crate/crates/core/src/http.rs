//! Blocking JSON-over-HTTP with bounded exponential backoff, shared by the
//! embedding and chat providers.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 250,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// retry budget is spent.
    pub fn run<T>(&self, what: &str, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        let mut delay = self.initial_backoff_ms;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    attempt += 1;
                    log::warn!(
                        "{what} failed (attempt {attempt}/{}): {e}; retrying in {delay}ms",
                        self.max_retries + 1
                    );
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = (delay.saturating_mul(2)).min(self.max_backoff_ms);
                }
                Err(e) => return Err(e),
            }
        }
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    bearer: Option<String>,
}

impl JsonClient {
    pub fn new(endpoint: &str, timeout: Duration, api_key_env: Option<&str>) -> Result<Self> {
        let bearer = match api_key_env.filter(|v| !v.is_empty()) {
            Some(var) => Some(std::env::var(var).map_err(|_| Error::MissingSecret(var.to_string()))?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint: endpoint.to_string(),
            bearer,
        })
    }

    /// One POST. Connection problems, 429 and 5xx map to `Error::Transport`
    /// (retryable); other statuses and undecodable bodies to `ProviderResponse`.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::Transport(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Error::Transport(format!("{}: HTTP {status}", self.endpoint)));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::ProviderResponse(format!(
                "{}: HTTP {status}: {}",
                self.endpoint,
                text.chars().take(200).collect::<String>()
            )));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::ProviderResponse(format!("{}: {e}", self.endpoint)))
    }
}
