use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use consentry_core::{parse_ruleset, preset, DataSchema, RuleSet};
use serde::Deserialize;

/// Agent configuration, read from a TOML file.
///
/// ```toml
/// proxy-addr = "127.0.0.1:8640"
/// control-addr = "127.0.0.1:8765"
/// ruleset = "preset:cautious"      # or a path to an .apr file
/// repository = "me.prf"
/// overrides = "choices.ovr"
/// schemas = ["vehicles.pds"]
/// strip-referrer = true
/// block-cookies = false
/// warn-timeout = 30
/// fetch-timeout = 10
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct Config {
    pub proxy_addr: SocketAddr,
    pub control_addr: SocketAddr,
    pub ruleset: String,
    pub repository: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub schemas: Vec<PathBuf>,
    pub strip_referrer: bool,
    pub block_cookies: bool,
    /// Seconds a warn prompt may stay unanswered before the request is blocked.
    pub warn_timeout: u64,
    /// Seconds allowed for one policy fetch.
    pub fetch_timeout: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            proxy_addr: ([127, 0, 0, 1], 8640).into(),
            control_addr: ([127, 0, 0, 1], 8765).into(),
            ruleset: "preset:cautious".into(),
            repository: None,
            overrides: None,
            schemas: Vec::new(),
            strip_referrer: false,
            block_cookies: false,
            warn_timeout: 30,
            fetch_timeout: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn invalid(path: &Path, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

impl Config {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let mut config: Config = toml::from_str(&text).map_err(|e| invalid(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.repository.as_mut().map(rebase);
        config.overrides.as_mut().map(rebase);
        config.schemas.iter_mut().for_each(rebase);
        if !config.ruleset.starts_with("preset:") {
            let mut p = PathBuf::from(&config.ruleset);
            rebase(&mut p);
            config.ruleset = p.display().to_string();
        }
        Ok(config)
    }

    pub fn warn_timeout(&self) -> Duration {
        Duration::from_secs(self.warn_timeout)
    }

    pub fn fetch_timeout(&self) -> Duration {
        Duration::from_secs(self.fetch_timeout)
    }

    /// File the active ruleset is saved to when edited, `None` for presets.
    pub fn ruleset_file(&self) -> Option<PathBuf> {
        (!self.ruleset.starts_with("preset:")).then(|| PathBuf::from(&self.ruleset))
    }

    pub fn load_ruleset(&self) -> Result<RuleSet, ConfigError> {
        load_ruleset_from(&self.ruleset)
    }

    /// Base schema merged with every configured extension.
    pub fn load_schema(&self) -> Result<DataSchema, ConfigError> {
        let mut schema = consentry_core::base_schema();
        for path in &self.schemas {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            schema = schema.load_extension(&text).map_err(|e| invalid(path, e))?;
        }
        Ok(schema)
    }
}

/// `preset:NAME` or a path to an APR file.
pub fn load_ruleset_from(source: &str) -> Result<RuleSet, ConfigError> {
    if let Some(name) = source.strip_prefix("preset:") {
        return preset(name).map_err(|e| invalid(Path::new(source), e));
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    parse_ruleset(&text).map_err(|e| invalid(path, e))
}
