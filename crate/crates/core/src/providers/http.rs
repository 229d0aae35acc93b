//! HTTP provider speaking the de-facto chat-completions JSON protocol.
//!
//! Retries transport failures, 5xx and 429 with exponential backoff; other
//! 4xx statuses are never retried.

use std::thread::sleep;
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::providers::{CompletionRequest, Provider, ProviderConfig};

pub struct HttpProvider {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpProvider { config, client })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.config.model.as_deref().unwrap_or_default(),
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "seed": request.seed,
        });
        if let Some(max_tokens) = self.config.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        body
    }

    fn api_key(&self) -> Option<String> {
        self.config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
    }

    fn extract_content(value: &Value) -> Result<String> {
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Validation("response has no choices[0].message.content".into()))
    }
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl Provider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let endpoint = self.config.endpoint.as_deref().unwrap();
        let body = self.body(request);
        let mut last_error;
        let mut attempt = 0u32;
        loop {
            let mut req = self.client.post(endpoint).json(&body);
            if let Some(key) = self.api_key() {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(response) => {
                    let status = response.status().as_u16();
                    if response.status().is_success() {
                        let value: Value = response.json().map_err(|e| Error::Transport {
                            attempts: attempt + 1,
                            message: e.to_string(),
                        })?;
                        return Self::extract_content(&value);
                    }
                    if !retryable_status(status) {
                        return Err(Error::HttpStatus { status });
                    }
                    last_error = format!("status {status}");
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempt >= self.config.max_retries {
                return Err(Error::Transport {
                    attempts: attempt + 1,
                    message: last_error,
                });
            }
            sleep(Duration::from_millis(
                self.config.backoff_ms << attempt.min(10),
            ));
            attempt += 1;
        }
    }

    fn tag(&self) -> String {
        format!(
            "http:{}@{}",
            self.config.model.as_deref().unwrap_or_default(),
            self.config.endpoint.as_deref().unwrap_or_default()
        )
    }
}
