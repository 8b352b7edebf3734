//! Flat `key = value` run configuration with precedence
//! CLI flag > config file > built-in default. Every resolved value is
//! recorded so the full configuration can be written next to the outputs
//! and replayed with `--config`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {} has no '=': {:?}", i + 1, raw))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn check_known(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !known.contains(&key.as_str()) {
                bail!("unknown config key {:?}", key);
            }
        }
        Ok(())
    }
}

/// Merges CLI values, config-file values, and defaults, recording the final
/// choice for every key it sees.
#[derive(Debug)]
pub struct Resolver {
    file: ConfigMap,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>, known: &[&str]) -> Result<Self> {
        let file = match config_path {
            Some(path) => {
                let map = ConfigMap::load(path)?;
                map.check_known(known)?;
                map
            }
            None => ConfigMap::default(),
        };
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.file.entries.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("config key {:?} has bad value {:?}: {}", key, raw, e)),
            None => Ok(None),
        }
    }

    /// Required value with a default.
    pub fn value<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let chosen = match cli {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), chosen.to_string());
        Ok(chosen)
    }

    /// Optional value; recorded only when present.
    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let chosen = match cli {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &chosen {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(chosen)
    }

    /// Boolean flag: a given CLI flag wins; otherwise the config file;
    /// otherwise false.
    pub fn flag(&mut self, key: &str, cli: bool) -> Result<bool> {
        let chosen = if cli {
            true
        } else {
            self.file_value(key)?.unwrap_or(false)
        };
        self.resolved.insert(key.to_string(), chosen.to_string());
        Ok(chosen)
    }

    /// Required value with no default.
    pub fn required<T>(&mut self, key: &str, cli: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, cli)?
            .ok_or_else(|| anyhow!("missing required option {:?} (flag or config key)", key))
    }

    /// The fully resolved configuration as `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.resolved {
            out.push_str(&format!("{} = {}\n", key, value));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())
            .with_context(|| format!("writing resolved config {}", path.display()))
    }
}
