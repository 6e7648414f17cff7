use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{build_prompt, ChatMessage, PromptVariant};
use super::{GeneratedMetadata, Source};
use crate::error::LlmError;
use crate::heuristics::Selection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub max_retries: u32,
    /// Wait before retry `n` is `retry_backoff_ms[min(n, len - 1)]`,
    /// unless the server sent `Retry-After`.
    pub retry_backoff_ms: Vec<u64>,
    /// Ask for `response_format: json_object`.
    pub json_mode: bool,
    pub timeout_secs: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "WARC2META_API_KEY".into(),
            model_name: "gpt-4o".into(),
            temperature: 0.0,
            max_in_flight: 1,
            max_retries: 3,
            retry_backoff_ms: vec![1_000, 2_000, 4_000, 8_000],
            json_mode: true,
            timeout_secs: 120,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        Ok(())
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = match self.retry_backoff_ms.as_slice() {
            [] => 0,
            s => s[(retry as usize).min(s.len() - 1)],
        };
        Duration::from_millis(ms)
    }
}

/// Blocking chat-completion client with retry on 429, 5xx and transport errors.
#[derive(Debug, Clone)]
pub struct ChatClient {
    agent: ureq::Agent,
    cfg: ClientConfig,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: ClientConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .build()
            .into();
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(ChatClient { agent, cfg, api_key })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, LlmError> {
        let url = format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path);
        let mut attempt = 0u32;
        loop {
            let mut request = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                request = request.header("Authorization", &format!("Bearer {key}"));
            }
            let outcome = request.send(serde_json::to_vec(body).expect("serializable body"));
            let retry_after;
            let failure = match outcome {
                Err(e) => {
                    retry_after = None;
                    LlmError::Transport(e.to_string())
                }
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    retry_after = response
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<f64>().ok())
                        .filter(|s| s.is_finite() && *s >= 0.0)
                        .map(Duration::from_secs_f64);
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| LlmError::Transport(e.to_string()))?;
                    match status {
                        200..=299 => {
                            return serde_json::from_str(&text)
                                .map_err(|e| LlmError::Api { status, body: format!("invalid JSON response: {e}") })
                        }
                        429 => LlmError::RateLimited { attempts: attempt + 1 },
                        500..=599 => LlmError::Api { status, body: text },
                        _ => return Err(LlmError::Api { status, body: text }),
                    }
                }
            };
            if attempt >= self.cfg.max_retries {
                return Err(failure);
            }
            let wait = retry_after.unwrap_or_else(|| self.cfg.backoff(attempt));
            log::debug!("retrying {url} in {wait:?} after {failure}");
            std::thread::sleep(wait);
            attempt += 1;
        }
    }

    /// One chat completion; returns the first choice's message content.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let mut body = json!({
            "model": self.cfg.model_name,
            "messages": messages,
            "temperature": self.cfg.temperature,
        });
        if self.cfg.json_mode {
            body["response_format"] = json!({ "type": "json_object" });
        }
        let reply = self.post("chat/completions", &body)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Api { status: 200, body: format!("no message content in {reply}") })
    }

    pub fn post_json(&self, path: &str, body: &Value) -> Result<Value, LlmError> {
        self.post(path, body)
    }
}

#[derive(Deserialize)]
struct Reply {
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
}

/// Validates a reply against `{"title": string, "abstract": string}`.
pub fn parse_reply(text: &str) -> Result<(String, String), String> {
    let reply: Reply = serde_json::from_str(text.trim()).map_err(|e| e.to_string())?;
    let (title, abstract_text) = (reply.title.trim().to_string(), reply.abstract_text.trim().to_string());
    if title.is_empty() || abstract_text.is_empty() {
        return Err("title and abstract must be non-empty".into());
    }
    Ok((title, abstract_text))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub metadata: GeneratedMetadata,
    /// Re-asks needed before the reply matched the schema.
    pub retry_count: u32,
}

/// A client bound to one prompt variant.
#[derive(Debug, Clone)]
pub struct MetadataGenerator {
    pub client: ChatClient,
    pub variant: PromptVariant,
}

impl MetadataGenerator {
    pub fn new(cfg: ClientConfig, variant: PromptVariant) -> Result<Self, LlmError> {
        Ok(MetadataGenerator { client: ChatClient::new(cfg)?, variant })
    }

    pub fn generate(&self, selection: &Selection) -> Result<Generation, LlmError> {
        let mut messages = build_prompt(self.variant, &selection.content, &selection.site_url)?;
        let max_retries = self.client.cfg.max_retries;
        let mut retry_count = 0;
        loop {
            let reply = self.client.complete(&messages)?;
            match parse_reply(&reply) {
                Ok((title, abstract_text)) => {
                    return Ok(Generation {
                        metadata: GeneratedMetadata {
                            site_id: selection.site_id.clone(),
                            source: Source::Combo(self.variant, selection.heuristic),
                            title,
                            abstract_text,
                            model_name: Some(self.client.cfg.model_name.clone()),
                        },
                        retry_count,
                    })
                }
                Err(e) if retry_count >= max_retries => {
                    return Err(LlmError::SchemaViolation { attempts: retry_count + 1, last_error: e })
                }
                Err(e) => {
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(format!(
                        "Your reply could not be used: {e}. Respond with only a JSON object of the form {{\"title\": \"...\", \"abstract\": \"...\"}}."
                    )));
                    retry_count += 1;
                }
            }
        }
    }
}

pub fn generate_metadata(selection: &Selection, variant: PromptVariant, cfg: &ClientConfig) -> Result<Generation, LlmError> {
    MetadataGenerator::new(cfg.clone(), variant)?.generate(selection)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_schema() {
        assert_eq!(
            parse_reply(" {\"title\":\"Acme\",\"abstract\":\"Tools.\"} ").unwrap(),
            ("Acme".to_string(), "Tools.".to_string())
        );
        assert!(parse_reply("Here is the JSON you asked for").is_err());
        assert!(parse_reply("{\"title\":\"Acme\"}").is_err());
        assert!(parse_reply("{\"title\":\"\",\"abstract\":\"x\"}").is_err());
        assert!(parse_reply("{\"title\":[\"Acme\"],\"abstract\":\"x\"}").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ClientConfig::default().validate().is_ok());
        let bad = ClientConfig { max_in_flight: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ClientConfig { temperature: 2.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn backoff_schedule_clamps() {
        let cfg = ClientConfig { retry_backoff_ms: vec![10, 20], ..Default::default() };
        assert_eq!(cfg.backoff(0), Duration::from_millis(10));
        assert_eq!(cfg.backoff(5), Duration::from_millis(20));
        let none = ClientConfig { retry_backoff_ms: vec![], ..Default::default() };
        assert_eq!(none.backoff(3), Duration::ZERO);
    }
}
