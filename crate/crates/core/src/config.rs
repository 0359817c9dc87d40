//! `key = value` run configuration. Blank lines and text after `#` are
//! ignored; keys use the command-line flag names (`nsim`, `blend`, …).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse(format!(
                    "config line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        Ok(RunConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Raw value; `_` and `-` are interchangeable in keys.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&key.replace('_', "-")).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Parse(format!("config `{key} = {v}`: {e}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
