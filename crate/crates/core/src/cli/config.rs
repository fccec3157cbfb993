use std::collections::BTreeMap;
use std::str::FromStr;

/// Keys a config file may set. Hyphens and underscores are interchangeable.
pub const KNOWN_KEYS: &[&str] = &[
    "variant",
    "epochs",
    "seed",
    "batch_size",
    "max_iterations",
    "lr",
    "label_smooth",
    "checkpoint_every",
    "mono",
    "d_sees_prev",
    "bars",
    "bpm",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: key {key:?} set twice")]
    Duplicate { line: usize, key: String },
    #[error("config line {line}: bad value {value:?} for {key:?}")]
    BadValue { line: usize, key: String, value: String },
}

/// Parsed `key = value` lines; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = k.trim().replace('-', "_");
            let value = v.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            if values.insert(key.clone(), (line, value)).is_some() {
                return Err(ConfigError::Duplicate { line, key });
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        debug_assert!(KNOWN_KEYS.contains(&key));
        match self.values.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| ConfigError::BadValue {
                line: *line,
                key: key.to_string(),
                value: value.clone(),
            }),
        }
    }

    /// Flag value if given, else the file's, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, ConfigError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`ConfigFile::resolve`] for settings without a default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ConfigError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
