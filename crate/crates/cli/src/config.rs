//! Flat `key = value` run configuration.
//!
//! Values come from an optional config file (one `key = value` per line,
//! `#` starts a comment) and are overridden by command-line flags. Every
//! value a command reads, including defaults, is recorded so it can be
//! echoed into the outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Keys that never influence results and are left out of the echo.
const UNECHOED: [&str; 2] = ["out", "jobs"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    command: &'static str,
    values: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut values = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected 'key = value'", number + 1)))?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", number + 1)));
        }
        if values.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("config line {}: duplicate key '{key}'", number + 1)));
        }
    }
    Ok(values)
}

impl RunConfig {
    /// Merges the config file with flag overrides and rejects keys the
    /// command does not understand.
    pub fn load(
        command: &'static str,
        allowed: &[&str],
        file: Option<&Path>,
        flags: Vec<(&'static str, Option<String>)>,
    ) -> CliResult<Self> {
        let mut values = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(key.to_string(), v);
            }
        }
        if let Some(key) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown config key '{key}' for command {command}")));
        }
        Ok(RunConfig { command, values, effective: BTreeMap::new() })
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn record(&mut self, key: &str, value: String) {
        if !UNECHOED.contains(&key) {
            self.effective.insert(key.to_string(), value);
        }
    }

    pub fn optional(&mut self, key: &str) -> Option<String> {
        let value = self.values.get(key).cloned();
        if let Some(v) = &value {
            self.record(key, v.clone());
        }
        value
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let value = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.record(key, value.clone());
        value
    }

    pub fn required(&mut self, key: &str) -> CliResult<String> {
        self.optional(key)
            .ok_or_else(|| CliError::Config(format!("missing required key '{key}' for command {}", self.command)))
    }

    pub fn parse<T>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.values.get(key).cloned() {
            Some(raw) => {
                let value = parse_value(key, &raw)?;
                self.record(key, raw);
                Ok(value)
            }
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn parse_required<T>(&mut self, key: &str) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.required(key)?;
        parse_value(key, &raw)
    }

    /// Comma-separated list; `None` when the key is absent.
    pub fn list(&mut self, key: &str) -> Option<Vec<String>> {
        self.optional(key).map(|v| split_list(&v))
    }

    pub fn seed(&mut self) -> CliResult<u64> {
        self.parse_required("seed")
    }

    /// Effective configuration as `key = value` lines, sorted by key.
    pub fn echo(&self) -> Vec<String> {
        self.effective.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

fn parse_value<T>(key: &str, raw: &str) -> CliResult<T>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse().map_err(|e| CliError::Config(format!("invalid value '{raw}' for '{key}': {e}")))
}

pub fn split_list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}
