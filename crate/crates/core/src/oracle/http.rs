//! Chat-completions client.
//!
//! Config file format (TOML, every key optional):
//!
//! ```toml
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4"
//! temperature = 0.0
//! max_tokens = 1024
//! max_retries = 3
//! backoff_ms = 500
//! timeout_secs = 120
//! ```
//!
//! The credential is read from `API_KEY` and sent as a bearer token.

use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{OracleError, OracleQuery, OracleResponse, SolutionOracle};
use crate::pddl::{Block, Problem};

pub const API_KEY_VAR: &str = "API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            temperature: 0.0,
            max_tokens: 1024,
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
            api_key: None,
        }
    }
}

impl HttpConfig {
    pub fn from_toml(text: &str) -> Result<Self, OracleError> {
        toml::from_str(text).map_err(|e| OracleError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills `api_key` from the environment when not already set.
    pub fn with_env_key(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        }
        self
    }
}

fn request_body(query: &OracleQuery, config: &HttpConfig) -> Value {
    json!({
        "model": config.model,
        "messages": query.messages(),
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    })
}

/// First choice's text: `message.content` for chat, `text` for legacy completions.
fn extract_text(body: &str) -> Result<String, OracleError> {
    let v: Value = serde_json::from_str(body).map_err(|e| OracleError::MalformedApiResponse(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| OracleError::MalformedApiResponse("no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| OracleError::MalformedApiResponse("first choice has no text".into()))
}

enum Attempt {
    Done(String),
    Retry(OracleError),
    Fatal(OracleError),
}

fn attempt(client: &reqwest::blocking::Client, query: &OracleQuery, config: &HttpConfig) -> Attempt {
    let mut req = client.post(&config.endpoint).json(&request_body(query, config));
    if let Some(key) = &config.api_key {
        req = req.bearer_auth(key);
    }
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(OracleError::Transport(e.to_string())),
    };
    let status = resp.status();
    let body = resp.text().unwrap_or_default();
    match status.as_u16() {
        200..=299 => match extract_text(&body) {
            Ok(t) => Attempt::Done(t),
            Err(e) => Attempt::Fatal(e),
        },
        401 | 403 => Attempt::Fatal(OracleError::Auth(format!("HTTP {status}"))),
        429 => Attempt::Retry(OracleError::RateLimited { attempts: 0 }),
        500..=599 => Attempt::Retry(OracleError::Transport(format!("HTTP {status}"))),
        _ => Attempt::Fatal(OracleError::Transport(format!("HTTP {status}: {}", body.trim()))),
    }
}

/// Posts `query`, retrying transport failures, 429 and 5xx with exponential
/// backoff, then parses the completion against `objects`.
pub fn http_oracle_query(
    query: &OracleQuery,
    config: &HttpConfig,
    objects: &[Block],
) -> Result<OracleResponse, OracleError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| OracleError::Transport(e.to_string()))?;
    query_with(&client, query, config, objects)
}

fn query_with(
    client: &reqwest::blocking::Client,
    query: &OracleQuery,
    config: &HttpConfig,
    objects: &[Block],
) -> Result<OracleResponse, OracleError> {
    let attempts = config.max_retries + 1;
    let mut last = None;
    for i in 0..attempts {
        if i > 0 {
            let wait = config.backoff_ms.saturating_mul(1u64 << (i - 1).min(16));
            log::debug!("retry {i} after {wait} ms");
            thread::sleep(Duration::from_millis(wait));
        }
        match attempt(client, query, config) {
            Attempt::Done(text) => return Ok(OracleResponse::from_completion(text, objects)),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(e) => {
                log::warn!("oracle request failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(match last {
        Some(OracleError::RateLimited { .. }) => OracleError::RateLimited { attempts },
        Some(e) => e,
        None => OracleError::Transport("no attempt made".into()),
    })
}

pub struct HttpOracle {
    config: HttpConfig,
    client: Option<reqwest::blocking::Client>,
}

impl HttpOracle {
    pub fn new(config: HttpConfig) -> Self {
        HttpOracle { config, client: None }
    }
}

impl SolutionOracle for HttpOracle {
    fn query(&mut self, query: &OracleQuery, problem: &Problem) -> Result<OracleResponse, OracleError> {
        if self.client.is_none() {
            let c = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(self.config.timeout_secs))
                .build()
                .map_err(|e| OracleError::Transport(e.to_string()))?;
            self.client = Some(c);
        }
        let client = self.client.as_ref().expect("client was just built");
        query_with(client, query, &self.config, &problem.objects)
    }

    fn describe(&self) -> String {
        format!("http {} model {}", self.config.endpoint, self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_chat_and_legacy_shapes() {
        let chat = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(extract_text(chat).unwrap(), "hi");
        assert_eq!(extract_text(r#"{"choices":[{"text":"yo"}]}"#).unwrap(), "yo");
        assert!(matches!(extract_text("{}"), Err(OracleError::MalformedApiResponse(_))));
        assert!(matches!(
            extract_text("nope"),
            Err(OracleError::MalformedApiResponse(_))
        ));
    }

    #[test]
    fn config_from_toml() {
        let c = HttpConfig::from_toml("model = \"gpt-3.5-turbo\"\nmax_retries = 1\n").unwrap();
        assert_eq!(c.model, "gpt-3.5-turbo");
        assert_eq!(c.max_retries, 1);
        assert_eq!(c.temperature, 0.0);
        assert!(HttpConfig::from_toml("bogus = 1").is_err());
    }
}
