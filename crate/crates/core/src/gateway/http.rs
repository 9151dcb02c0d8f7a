use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionRequest, Gateway, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "HttpConfig::default_key_env")]
    pub api_key_env: String,
    #[serde(default = "HttpConfig::default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "HttpConfig::default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "HttpConfig::default_backoff")]
    pub backoff_ms: u64,
    /// Send the seed field; not every provider accepts it.
    #[serde(default = "HttpConfig::default_send_seed")]
    pub send_seed: bool,
}

impl HttpConfig {
    fn default_key_env() -> String {
        "AUQ_API_KEY".into()
    }
    fn default_timeout() -> u64 {
        60
    }
    fn default_attempts() -> u32 {
        3
    }
    fn default_backoff() -> u64 {
        500
    }
    fn default_send_seed() -> bool {
        true
    }

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: Self::default_key_env(),
            timeout_secs: Self::default_timeout(),
            max_attempts: Self::default_attempts(),
            backoff_ms: Self::default_backoff(),
            send_seed: true,
        }
    }
}

pub struct HttpGateway {
    config: HttpConfig,
    url: Url,
    api_key: Option<String>,
    client: Client,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl HttpGateway {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let url = Url::parse(&config.endpoint).map_err(|e| GatewayError::Config(format!("endpoint: {e}")))?;
        if config.max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be >= 1".into()));
        }
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            config,
            url,
            api_key,
            client,
        })
    }

    fn body(&self, req: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": req.prompt.text}],
            "temperature": req.temperature,
        });
        if self.config.send_seed {
            // distinct provider seed per sample so N samples differ
            body["seed"] = json!(req.seed.wrapping_add(u64::from(req.sample_index.saturating_sub(1))));
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut rb = self.client.post(self.url.clone()).json(body);
        if let Some(k) = &self.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        log::debug!("response {status}: {text}");
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(GatewayError::Transport {
                attempts: 1,
                message: format!("status {status}: {text}"),
            }));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Attempt::Fatal(GatewayError::BadResponse(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(GatewayError::BadResponse("missing choices[0].message.content".into())))
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        if req.prompt.text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        let body = self.body(req);
        log::debug!("request {}", body);
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text.chars().take(req.max_output).collect()),
                Err(Attempt::Fatal(GatewayError::Transport { message, .. })) => {
                    return Err(GatewayError::Transport { attempts: attempt, message })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("attempt {attempt} failed: {msg}");
                    last = msg;
                    if attempt < self.config.max_attempts {
                        std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts: self.config.max_attempts,
            message: last,
        })
    }

    fn preflight(&self) -> Result<(), GatewayError> {
        let host = self.url.host_str().ok_or_else(|| GatewayError::Config("endpoint has no host".into()))?;
        let port = self
            .url
            .port_or_known_default()
            .ok_or_else(|| GatewayError::Config("endpoint has no port".into()))?;
        let addrs = (host, port)
            .to_socket_addrs()
            .map_err(|e| GatewayError::Transport { attempts: 1, message: format!("resolve {host}: {e}") })?;
        for a in addrs {
            if TcpStream::connect_timeout(&a, Duration::from_secs(5)).is_ok() {
                return Ok(());
            }
        }
        Err(GatewayError::Transport {
            attempts: 1,
            message: format!("cannot connect to {host}:{port}"),
        })
    }
}
