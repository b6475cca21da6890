use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::mock::MockScript;

pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// A model runner on the same host or network, e.g. Ollama.
    Local,
    /// A hosted chat-completions API.
    Hosted,
    Mock,
}

impl std::str::FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "local" => Ok(Mode::Local),
            "hosted" => Ok(Mode::Hosted),
            "mock" => Ok(Mode::Mock),
            _ => Err(ConfigError::InvalidConfig("mode")),
        }
    }
}

/// An API key. Debug and Display never show it.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// Replaces every occurrence of the secret in `text`.
    pub fn redact(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_owned()
        } else {
            text.replace(&self.0, "[redacted]")
        }
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret([redacted])")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[redacted]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid backend configuration: `{0}`")]
    InvalidConfig(&'static str),
    #[error("cannot read mock script {path}: {reason}")]
    Script { path: PathBuf, reason: String },
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub mode: Mode,
    pub base_url: Option<Url>,
    pub api_key: Option<Secret>,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_tokens: u32,
    /// Replies for the mock backend. Ignored by the others.
    pub script: Option<MockScript>,
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig {
            mode: Mode::Mock,
            base_url: None,
            api_key: None,
            model_name: "mock".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_tokens: DEFAULT_MAX_TOKENS,
            script: None,
        }
    }

    pub fn with_script(mut self, script: MockScript) -> Self {
        self.script = Some(script);
        self
    }

    /// Reads `LLM_MODE`, `LLM_BASE_URL`, `LLM_API_KEY`, `LLM_MODEL`,
    /// `LLM_TIMEOUT_MS`, `LLM_MAX_TOKENS` and `LLM_MOCK_SCRIPT`.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        let mode = match get("LLM_MODE") {
            Some(m) => m.parse()?,
            None => Mode::Mock,
        };
        let base_url = get("LLM_BASE_URL")
            .map(|u| Url::parse(u.trim()).map_err(|_| ConfigError::InvalidConfig("base_url")))
            .transpose()?;
        let number = |k: &str, field: &'static str, default: u64| -> Result<u64, ConfigError> {
            match get(k) {
                Some(v) => v.trim().parse().map_err(|_| ConfigError::InvalidConfig(field)),
                None => Ok(default),
            }
        };
        let script = match get("LLM_MOCK_SCRIPT") {
            Some(path) => Some(MockScript::load(path.trim())?),
            None => None,
        };
        let cfg = BackendConfig {
            mode,
            base_url,
            api_key: get("LLM_API_KEY").map(Secret::new),
            model_name: get("LLM_MODEL").unwrap_or_else(|| default_model(mode).to_owned()),
            timeout_ms: number("LLM_TIMEOUT_MS", "timeout_ms", DEFAULT_TIMEOUT_MS)?,
            max_tokens: u32::try_from(number("LLM_MAX_TOKENS", "max_tokens", DEFAULT_MAX_TOKENS as u64)?)
                .map_err(|_| ConfigError::InvalidConfig("max_tokens"))?,
            script,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::InvalidConfig("timeout_ms"));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::InvalidConfig("max_tokens"));
        }
        if self.mode == Mode::Mock {
            return Ok(());
        }
        match &self.base_url {
            Some(u) if matches!(u.scheme(), "http" | "https") => {}
            _ => return Err(ConfigError::InvalidConfig("base_url")),
        }
        if self.mode == Mode::Hosted && self.api_key.as_ref().is_none_or(|k| k.expose().is_empty()) {
            return Err(ConfigError::InvalidConfig("api_key"));
        }
        if self.model_name.trim().is_empty() {
            return Err(ConfigError::InvalidConfig("model_name"));
        }
        Ok(())
    }
}

fn default_model(mode: Mode) -> &'static str {
    match mode {
        Mode::Local => "llama3",
        Mode::Hosted => "gpt-4o-mini",
        Mode::Mock => "mock",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn hosted_needs_a_key() {
        let err = BackendConfig::from_lookup(env(&[("LLM_MODE", "hosted"), ("LLM_BASE_URL", "https://api.example.com")]))
            .unwrap_err();
        assert_eq!(err, ConfigError::InvalidConfig("api_key"));
    }

    #[test]
    fn local_needs_a_url() {
        let err = BackendConfig::from_lookup(env(&[("LLM_MODE", "local")])).unwrap_err();
        assert_eq!(err, ConfigError::InvalidConfig("base_url"));
    }

    #[test]
    fn mock_is_the_default() {
        let cfg = BackendConfig::from_lookup(env(&[])).unwrap();
        assert_eq!(cfg.mode, Mode::Mock);
        assert!(cfg.base_url.is_none());
    }

    #[test]
    fn zero_timeout_is_invalid() {
        let err = BackendConfig::from_lookup(env(&[("LLM_TIMEOUT_MS", "0")])).unwrap_err();
        assert_eq!(err, ConfigError::InvalidConfig("timeout_ms"));
    }

    #[test]
    fn unknown_mode() {
        assert!(BackendConfig::from_lookup(env(&[("LLM_MODE", "cloud")])).is_err());
    }

    #[test]
    fn secret_stays_hidden() {
        let cfg = BackendConfig::from_lookup(env(&[
            ("LLM_MODE", "hosted"),
            ("LLM_BASE_URL", "https://api.example.com"),
            ("LLM_API_KEY", "sk-live-abc123"),
        ]))
        .unwrap();
        let shown = format!("{cfg:?} {}", cfg.api_key.as_ref().unwrap());
        assert!(!shown.contains("sk-live-abc123"), "{shown}");
        assert_eq!(cfg.api_key.unwrap().redact("key=sk-live-abc123!"), "key=[redacted]!");
    }
}
