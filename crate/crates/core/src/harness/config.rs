//! Flat `key = value` configuration with `[section]` headers.
//!
//! Keys inside a section are stored as `section.key`. Lines starting with
//! `#` or `;` are comments. Later assignments win, which is how command-line
//! `--section.key=value` overrides are layered on top of a file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}: unterminated section header", ln + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", ln + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::config(format!("line {}: empty key", ln + 1)));
            }
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Rejects keys that no command reads, which catches typos early.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for k in self.values.keys() {
            if !known.contains(&k.as_str()) {
                return Err(Error::config(format!("unknown config key {k:?}")));
            }
        }
        Ok(())
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::config(format!("cannot parse {key} = {v:?}")))
            })
            .transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(Error::config(format!("{key} = {v:?} is not a boolean"))),
        }
    }

    /// Comma-separated list; `a-b` expands to an inclusive integer range.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let bad = || Error::config(format!("cannot parse list {key} = {v:?}"));
        let mut out = Vec::new();
        for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.split_once('-').filter(|(a, _)| !a.is_empty()) {
                Some((a, b)) if a.parse::<u64>().is_ok() && b.parse::<u64>().is_ok() => {
                    let (a, b): (u64, u64) = (a.parse().unwrap(), b.parse().unwrap());
                    if b < a {
                        return Err(bad());
                    }
                    for i in a..=b {
                        out.push(i.to_string().parse::<T>().map_err(|_| bad())?);
                    }
                }
                _ => out.push(tok.parse::<T>().map_err(|_| bad())?),
            }
        }
        Ok(Some(out))
    }

    /// `full`/`none` map to `None`, anything else must be a number.
    pub fn optional_usize(&self, key: &str, default: Option<usize>) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(default),
            Some("full" | "none" | "") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("{key} = {v:?} is neither a number nor 'full'"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}
