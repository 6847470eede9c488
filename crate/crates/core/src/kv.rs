//! Flat `key = value` text files used for problem specs and sweep configs.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{MmvError, Result};

/// Parsed key-value file. Blank lines and `#` comments are ignored; a key
/// may appear only once.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                MmvError::Parse(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(MmvError::Parse(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| MmvError::Parse(format!("invalid value '{v}' for key '{key}'")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| MmvError::Parse(format!("missing key '{key}'")))
    }

    /// Comma-separated list value.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|_| MmvError::Parse(format!("invalid list item '{s}' for key '{key}'")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
