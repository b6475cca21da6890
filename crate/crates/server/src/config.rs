use std::net::SocketAddr;
use std::path::PathBuf;

use thiserror::Error;
use tutorflow_gateway::{BackendConfig, ConfigError};

pub const DEFAULT_TOKEN_TTL_MS: i64 = 3_600_000;
pub const DEFAULT_UPLOAD_CAP_BYTES: usize = 20 * 1024 * 1024;
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ServerConfigError {
    #[error("{name} is invalid: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error(transparent)]
    Backend(#[from] ConfigError),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub storage_path: PathBuf,
    pub bind_addr: SocketAddr,
    pub token_ttl_ms: i64,
    pub upload_cap_bytes: usize,
    /// When unset a random secret is generated once and kept in storage.
    pub token_secret: Option<String>,
    /// JSON permission matrix replacing the built-in one.
    pub permission_matrix: Option<PathBuf>,
    /// Directory of UTF-8 text files indexed as curated material.
    pub corpus_dir: Option<PathBuf>,
    /// Creates this administrator on startup if no account has the name.
    pub bootstrap_admin: Option<(String, String)>,
    pub backend: BackendConfig,
}

impl ServerConfig {
    /// Defaults suitable for tests: mock backend, storage at `storage_path`.
    pub fn new(storage_path: impl Into<PathBuf>) -> Self {
        ServerConfig {
            storage_path: storage_path.into(),
            bind_addr: DEFAULT_BIND_ADDR.parse().unwrap(),
            token_ttl_ms: DEFAULT_TOKEN_TTL_MS,
            upload_cap_bytes: DEFAULT_UPLOAD_CAP_BYTES,
            token_secret: None,
            permission_matrix: None,
            corpus_dir: None,
            bootstrap_admin: None,
            backend: BackendConfig::mock(),
        }
    }

    pub fn from_env() -> Result<Self, ServerConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ServerConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mut cfg = ServerConfig::new(get("STORAGE_PATH").unwrap_or_else(|| "./data".into()));
        if let Some(v) = get("BIND_ADDR") {
            cfg.bind_addr = v.parse().map_err(|e| invalid("BIND_ADDR", e))?;
        }
        if let Some(v) = get("TOKEN_TTL_MS") {
            cfg.token_ttl_ms = v.parse().map_err(|e| invalid("TOKEN_TTL_MS", e))?;
            if cfg.token_ttl_ms <= 0 {
                return Err(invalid("TOKEN_TTL_MS", "must be positive"));
            }
        }
        if let Some(v) = get("UPLOAD_CAP_BYTES") {
            cfg.upload_cap_bytes = v.parse().map_err(|e| invalid("UPLOAD_CAP_BYTES", e))?;
        }
        cfg.token_secret = get("TOKEN_SECRET");
        cfg.permission_matrix = get("PERMISSION_MATRIX").map(PathBuf::from);
        cfg.corpus_dir = get("CORPUS_DIR").map(PathBuf::from);
        cfg.bootstrap_admin = match (get("ADMIN_USERNAME"), get("ADMIN_PASSWORD")) {
            (Some(u), Some(p)) => Some((u, p)),
            (None, None) => None,
            _ => return Err(invalid("ADMIN_USERNAME", "ADMIN_USERNAME and ADMIN_PASSWORD go together")),
        };
        cfg.backend = BackendConfig::from_lookup(&lookup)?;
        Ok(cfg)
    }
}

fn invalid(name: &'static str, reason: impl ToString) -> ServerConfigError {
    ServerConfigError::Invalid { name, reason: reason.to_string() }
}
