//! Layered settings: command-line flags over environment variables over a
//! TOML file. Every field is optional at each layer; [`Settings::resolve`]
//! merges them field by field and fills defaults.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use tod_core::ingest::SUPPORTED_DOMAINS;

pub const ENV_CONFIG: &str = "TOD_CONFIG";
pub const ENV_SCHEMA: &str = "TOD_SCHEMA";
pub const ENV_DB_DIR: &str = "TOD_DB_DIR";
pub const ENV_DIALOGUES_DIR: &str = "TOD_DIALOGUES_DIR";
pub const ENV_DOMAINS: &str = "TOD_DOMAINS";
pub const ENV_EXTRACTOR: &str = "TOD_EXTRACTOR";
pub const ENV_BIND: &str = "TOD_BIND";
pub const ENV_IDLE_TIMEOUT: &str = "TOD_IDLE_TIMEOUT_SECS";

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_IDLE_TIMEOUT_SECS: u64 = 1800;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
}

/// Which extractor/classifier pair drives sessions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    #[default]
    Rule,
    Llm,
}

impl FromStr for ExtractorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rule" => Ok(Self::Rule),
            "llm" => Ok(Self::Llm),
            other => Err(format!("expected `rule` or `llm`, got `{other}`")),
        }
    }
}

/// One configuration layer. All fields optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub schema: Option<PathBuf>,
    pub db_dir: Option<PathBuf>,
    pub dialogues_dir: Option<PathBuf>,
    pub domains: Option<Vec<String>>,
    pub extractor: Option<ExtractorKind>,
    pub bind: Option<String>,
    pub idle_timeout_secs: Option<u64>,
}

impl Layer {
    /// Reads a TOML file layer.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads the environment layer through `get` (normally `std::env::var`).
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        let extractor = get(ENV_EXTRACTOR)
            .map(|v| {
                v.parse().map_err(|reason| ConfigError::Invalid {
                    key: ENV_EXTRACTOR.into(),
                    reason,
                })
            })
            .transpose()?;
        let idle_timeout_secs = get(ENV_IDLE_TIMEOUT)
            .map(|v| {
                v.trim().parse().map_err(|_| ConfigError::Invalid {
                    key: ENV_IDLE_TIMEOUT.into(),
                    reason: format!("`{v}` is not a number of seconds"),
                })
            })
            .transpose()?;
        Ok(Self {
            schema: get(ENV_SCHEMA).map(PathBuf::from),
            db_dir: get(ENV_DB_DIR).map(PathBuf::from),
            dialogues_dir: get(ENV_DIALOGUES_DIR).map(PathBuf::from),
            domains: get(ENV_DOMAINS).map(|v| split_list(&v)),
            extractor,
            bind: get(ENV_BIND),
            idle_timeout_secs,
        })
    }

    /// Field-wise: values of `self` win over `lower`.
    pub fn over(self, lower: Layer) -> Layer {
        Layer {
            schema: self.schema.or(lower.schema),
            db_dir: self.db_dir.or(lower.db_dir),
            dialogues_dir: self.dialogues_dir.or(lower.dialogues_dir),
            domains: self.domains.or(lower.domains),
            extractor: self.extractor.or(lower.extractor),
            bind: self.bind.or(lower.bind),
            idle_timeout_secs: self.idle_timeout_secs.or(lower.idle_timeout_secs),
        }
    }
}

pub fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Where domain data comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    /// The small built-in fixture databases.
    Fixtures,
    /// A MultiWOZ 2.2 layout: schema file plus `<db_dir>/<domain>_db.json`.
    MultiWoz { schema: PathBuf, db_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub source: DataSource,
    pub dialogues_dir: Option<PathBuf>,
    pub domains: Vec<String>,
    pub extractor: ExtractorKind,
    pub bind: SocketAddr,
    pub idle_timeout: Duration,
}

impl Settings {
    /// Merges `cli` over `env` over `file` and validates the result.
    pub fn resolve(cli: Layer, env: Layer, file: Layer) -> Result<Self, ConfigError> {
        let merged = cli.over(env).over(file);
        let source = match (merged.schema, merged.db_dir) {
            (None, None) => DataSource::Fixtures,
            (Some(schema), Some(db_dir)) => DataSource::MultiWoz { schema, db_dir },
            (Some(_), None) | (None, Some(_)) => {
                return Err(ConfigError::Invalid {
                    key: "schema/db_dir".into(),
                    reason: "both or neither must be given".into(),
                })
            }
        };
        let domains = merged
            .domains
            .unwrap_or_else(|| SUPPORTED_DOMAINS.iter().map(|d| d.to_string()).collect());
        if domains.is_empty() {
            return Err(ConfigError::Invalid {
                key: "domains".into(),
                reason: "no domain selected".into(),
            });
        }
        if let Some(d) = domains.iter().find(|d| !SUPPORTED_DOMAINS.contains(&d.as_str())) {
            return Err(ConfigError::Invalid {
                key: "domains".into(),
                reason: format!("unsupported domain `{d}`"),
            });
        }
        let bind_text = merged.bind.unwrap_or_else(|| DEFAULT_BIND.to_string());
        let bind = bind_text.parse().map_err(|_| ConfigError::Invalid {
            key: "bind".into(),
            reason: format!("`{bind_text}` is not a socket address"),
        })?;
        let secs = merged.idle_timeout_secs.unwrap_or(DEFAULT_IDLE_TIMEOUT_SECS);
        if secs == 0 {
            return Err(ConfigError::Invalid {
                key: "idle_timeout_secs".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            source,
            dialogues_dir: merged.dialogues_dir,
            domains,
            extractor: merged.extractor.unwrap_or_default(),
            bind,
            idle_timeout: Duration::from_secs(secs),
        })
    }

    /// Reads the file named by `config_path` (or `TOD_CONFIG`) and the
    /// process environment, then applies `cli` on top.
    pub fn load(cli: Layer, config_path: Option<&Path>) -> Result<Self, ConfigError> {
        let env_config = std::env::var(ENV_CONFIG).ok().filter(|p| !p.is_empty());
        let file = match config_path
            .map(Path::to_path_buf)
            .or(env_config.map(PathBuf::from))
        {
            Some(path) => Layer::from_file(&path)?,
            None => Layer::default(),
        };
        let env = Layer::from_lookup(|k| std::env::var(k).ok())?;
        Self::resolve(cli, env, file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> Layer {
        let map: HashMap<String, String> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Layer::from_lookup(|k| map.get(k).cloned()).unwrap()
    }

    #[test]
    fn defaults_use_fixtures() {
        let s = Settings::resolve(Layer::default(), Layer::default(), Layer::default()).unwrap();
        assert_eq!(s.source, DataSource::Fixtures);
        assert_eq!(s.domains.len(), 4);
        assert_eq!(s.extractor, ExtractorKind::Rule);
        assert_eq!(s.bind.to_string(), DEFAULT_BIND);
        assert_eq!(s.idle_timeout, Duration::from_secs(DEFAULT_IDLE_TIMEOUT_SECS));
    }

    #[test]
    fn cli_beats_env_beats_file() {
        let file: Layer = toml::from_str(
            "bind = \"127.0.0.1:1\"\nidle_timeout_secs = 10\ndomains = [\"hotel\"]\nextractor = \"llm\"",
        )
        .unwrap();
        let env = env(&[(ENV_BIND, "127.0.0.1:2"), (ENV_IDLE_TIMEOUT, "20")]);
        let cli = Layer {
            bind: Some("127.0.0.1:3".into()),
            ..Layer::default()
        };
        let s = Settings::resolve(cli, env, file).unwrap();
        assert_eq!(s.bind.port(), 3);
        assert_eq!(s.idle_timeout, Duration::from_secs(20));
        assert_eq!(s.domains, vec!["hotel"]);
        assert_eq!(s.extractor, ExtractorKind::Llm);
    }

    #[test]
    fn env_lists_and_enums() {
        let layer = env(&[(ENV_DOMAINS, "Hotel, train ,"), (ENV_EXTRACTOR, "LLM")]);
        assert_eq!(layer.domains, Some(vec!["hotel".to_string(), "train".to_string()]));
        assert_eq!(layer.extractor, Some(ExtractorKind::Llm));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = |get: &[(&str, &str)]| {
            let map: HashMap<String, String> =
                get.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            Layer::from_lookup(|k| map.get(k).cloned())
        };
        assert!(bad(&[(ENV_EXTRACTOR, "neural")]).is_err());
        assert!(bad(&[(ENV_IDLE_TIMEOUT, "soon")]).is_err());
        let half = Layer {
            schema: Some("schema.json".into()),
            ..Layer::default()
        };
        assert!(Settings::resolve(half, Layer::default(), Layer::default()).is_err());
        let taxi = Layer {
            domains: Some(vec!["taxi".into()]),
            ..Layer::default()
        };
        assert!(Settings::resolve(taxi, Layer::default(), Layer::default()).is_err());
        assert!(toml::from_str::<Layer>("colour = \"red\"").is_err());
    }
}
