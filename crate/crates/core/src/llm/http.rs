//! OpenAI-compatible chat-completions provider.

use std::time::Duration;

use serde_json::{json, Value};

use super::{CallKind, ChatProvider, ChatRequest, ProviderError, ResponseFormat};

pub const ENV_BASE_URL: &str = "LLM_BASE_URL";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";

#[derive(Clone, PartialEq)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: String,
    pub model_name: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

// api_key stays out of logs
impl std::fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .field("model_name", &self.model_name)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        let url = url::Url::parse(&self.base_url).map_err(|e| format!("invalid base_url: {e}"))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(format!("unsupported scheme `{}`", url.scheme()));
        }
        if self.max_retries > 10 {
            return Err("max_retries must be at most 10".into());
        }
        if self.model_name.is_empty() {
            return Err("model name is empty".into());
        }
        Ok(())
    }

    /// Reads `LLM_BASE_URL`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Result<Self, String> {
        let var = |k: &str| std::env::var(k).map_err(|_| format!("{k} is not set"));
        let cfg = Self {
            base_url: var(ENV_BASE_URL)?,
            api_key: std::env::var(ENV_API_KEY).unwrap_or_default(),
            model_name: var(ENV_MODEL)?,
            timeout: Duration::from_secs(120),
            max_retries: 3,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, String> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn request_body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if request.response_format == ResponseFormat::JsonObject {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, _kind: CallKind, request: &ChatRequest) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if !self.config.api_key.is_empty() {
            call = call.header("Authorization", &format!("Bearer {}", self.config.api_key));
        }
        let mut response = call
            .send_json(self.request_body(request))
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProviderError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Fatal(format!("HTTP {status}: {text}")));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Transient(format!("unreadable body: {e}")))?;
        extract_content(&value).ok_or_else(|| ProviderError::Fatal("response has no choices[0].message.content".into()))
    }
}

fn extract_content(value: &Value) -> Option<String> {
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}
