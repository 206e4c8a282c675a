use std::env;
use std::path::PathBuf;
use std::time::Duration;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "chainshell-data";
pub const DEFAULT_TOKEN_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("invalid {variable}: {value:?}")]
pub struct ConfigError {
    pub variable: &'static str,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    /// Password of the `admin` user created on first boot. Ignored once
    /// users exist.
    pub admin_password: Option<String>,
    /// Directory of the built web client, served at `/`.
    pub web_dir: Option<PathBuf>,
    pub token_ttl: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: DEFAULT_PORT,
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            admin_password: None,
            web_dir: None,
            token_ttl: DEFAULT_TOKEN_TTL,
        }
    }
}

impl Config {
    /// Reads `CHAINSHELL_PORT`, `CHAINSHELL_DATA_DIR`,
    /// `CHAINSHELL_ADMIN_PASSWORD`, `CHAINSHELL_WEB_DIR` and
    /// `CHAINSHELL_TOKEN_TTL_SECS`, falling back to the defaults.
    pub fn from_env() -> Result<Config, ConfigError> {
        Config::from_lookup(|name| env::var(name).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        if let Some(v) = get("CHAINSHELL_PORT") {
            config.port = v.trim().parse().map_err(|_| ConfigError {
                variable: "CHAINSHELL_PORT",
                value: v,
            })?;
        }
        if let Some(v) = get("CHAINSHELL_DATA_DIR").filter(|v| !v.is_empty()) {
            config.data_dir = PathBuf::from(v);
        }
        config.admin_password = get("CHAINSHELL_ADMIN_PASSWORD").filter(|v| !v.is_empty());
        config.web_dir = get("CHAINSHELL_WEB_DIR").filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(v) = get("CHAINSHELL_TOKEN_TTL_SECS") {
            let secs: u64 = v.trim().parse().ok().filter(|&s| s > 0).ok_or(ConfigError {
                variable: "CHAINSHELL_TOKEN_TTL_SECS",
                value: v,
            })?;
            config.token_ttl = Duration::from_secs(secs);
        }
        Ok(config)
    }

    /// The settings echoed at startup; the admin password is never shown.
    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("port: {}", self.port),
            format!("data directory: {}", self.data_dir.display()),
            format!(
                "web directory: {}",
                self.web_dir.as_ref().map_or("none".to_string(), |d| d.display().to_string())
            ),
            format!("token lifetime: {} s", self.token_ttl.as_secs()),
            format!(
                "initial admin password: {}",
                if self.admin_password.is_some() { "set" } else { "not set" }
            ),
        ]
    }
}
