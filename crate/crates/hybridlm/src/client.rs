//! HTTP completion client.
//!
//! Each request is a JSON `POST` of `{"prompt": .., "max_tokens": ..}` to the
//! configured endpoint, with `Authorization: Bearer <token>` when a token is
//! set. The response body must be a JSON object carrying the completion text
//! under `completion` (or `text`).

use std::time::Duration;

use hybridlm_core::datagen::{ClientError, ClientSettings, CompletionClient, CompletionRequest};
use serde::Serialize;

/// Environment variable read for the bearer token by default.
pub const TOKEN_ENV: &str = "HYBRIDLM_API_TOKEN";

#[derive(Debug, Clone)]
pub struct HttpClient {
    settings: ClientSettings,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct Body<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

impl HttpClient {
    pub fn new(settings: ClientSettings, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(settings.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            settings,
            token,
            agent,
        }
    }

    /// Token taken from `var`; absent or empty means unauthenticated.
    pub fn from_env(settings: ClientSettings, var: &str) -> Self {
        let token = std::env::var(var).ok().filter(|t| !t.is_empty());
        Self::new(settings, token)
    }

    pub fn settings(&self) -> &ClientSettings {
        &self.settings
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(Body {
                prompt: &request.prompt,
                max_tokens: request.max_tokens,
            })
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ClientError::Timeout,
                other => ClientError::Transport(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body });
        }
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        ["completion", "text"]
            .iter()
            .find_map(|k| value.get(k).and_then(|v| v.as_str()))
            .map(str::to_string)
            .ok_or_else(|| ClientError::BadResponse("no `completion` string in response".into()))
    }

    /// One thread per request; results are collected in request order.
    fn complete_all(&self, requests: &[CompletionRequest]) -> Vec<Result<String, ClientError>> {
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.max_in_flight()) {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|r| s.spawn(move || self.complete(r)))
                    .collect();
                for h in handles {
                    out.push(
                        h.join().unwrap_or_else(|_| {
                            Err(ClientError::Transport("worker panicked".into()))
                        }),
                    );
                }
            });
        }
        out
    }

    fn max_in_flight(&self) -> usize {
        self.settings.max_in_flight.max(1)
    }
}
