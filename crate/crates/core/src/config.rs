//! Plain-text `key = value` configuration files. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValueConfig {
    source: String,
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, "expected `key = value`"))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::parse(source, i + 1, "empty key"));
            }
            if entries.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::parse(source, i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(KeyValueConfig {
            source: source.to_owned(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Keys are normalized so `top_k` and `top-k` are the same key.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&key.replace('_', "-")).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::InvalidArgument(format!("{}: bad value `{v}` for `{key}`", self.source))
                })
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
