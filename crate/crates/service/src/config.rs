use std::path::PathBuf;

use provcube_core::cube::DEFAULT_GRID_STEP;
use thiserror::Error;

pub const DEFAULT_SECRET_VAR: &str = "PROVCUBE_SECRET";
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_URL_TTL: u64 = 3600;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub secret: Vec<u8>,
    pub port: u16,
    /// Executor threads. Zero leaves queued jobs for
    /// [`crate::JobService::process_next_queued`].
    pub workers: usize,
    pub grid_step: f64,
    pub data_dir: PathBuf,
    /// Lifetime of every signed link handed out, in seconds.
    pub url_ttl: u64,
    /// Append job events to `<data_dir>/journal.jsonl` and replay it on start.
    pub journal: bool,
}

impl ServiceConfig {
    pub fn new(secret: impl Into<Vec<u8>>, data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            secret: secret.into(),
            port: DEFAULT_PORT,
            workers: 1,
            grid_step: DEFAULT_GRID_STEP,
            data_dir: data_dir.into(),
            url_ttl: DEFAULT_URL_TTL,
            journal: true,
        }
    }

    /// Read settings from the process environment. The secret comes from
    /// `secret_var`; everything else from `PROVCUBE_*` variables.
    pub fn from_env(secret_var: &str) -> Result<Self, ConfigError> {
        Self::from_lookup(secret_var, |k| std::env::var(k).ok())
    }

    pub fn from_lookup(secret_var: &str, get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let secret = get(secret_var)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| ConfigError::MissingSecret(secret_var.to_string()))?;
        let data_dir = get("PROVCUBE_DATA_DIR").unwrap_or_else(|| "provcube-data".into());
        let mut cfg = ServiceConfig::new(secret, data_dir);

        fn parsed<T: std::str::FromStr>(
            get: &impl Fn(&str) -> Option<String>,
            key: &'static str,
        ) -> Result<Option<T>, ConfigError> {
            get(key)
                .map(|v| v.trim().parse().map_err(|_| ConfigError::Invalid { key, value: v }))
                .transpose()
        }
        if let Some(p) = parsed(&get, "PROVCUBE_PORT")? {
            cfg.port = p;
        }
        if let Some(w) = parsed(&get, "PROVCUBE_WORKERS")? {
            cfg.workers = w;
        }
        if let Some(g) = parsed::<f64>(&get, "PROVCUBE_GRID_STEP")? {
            if !(g.is_finite() && g > 0.0) {
                return Err(ConfigError::Invalid {
                    key: "PROVCUBE_GRID_STEP",
                    value: g.to_string(),
                });
            }
            cfg.grid_step = g;
        }
        if let Some(t) = parsed::<u64>(&get, "PROVCUBE_URL_TTL")? {
            cfg.url_ttl = t.max(1);
        }
        if let Some(j) = get("PROVCUBE_JOURNAL") {
            cfg.journal = !matches!(j.as_str(), "0" | "false" | "off");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("environment variable {0} must hold the URL signing secret")]
    MissingSecret(String),
    #[error("invalid value {value:?} for {key}")]
    Invalid { key: &'static str, value: String },
}
