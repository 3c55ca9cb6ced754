//! Flat key=value configuration files.
//!
//! Flags always win over config values; the only environment variable
//! honored anywhere is `TRIARB_OUT` for the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}: line {}: expected key=value", path.display(), i + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}: {e}"),
            },
        }
    }

    /// Comma-separated integer list.
    pub fn id_list(&self, key: &str) -> Result<Vec<i64>> {
        match self.values.get(key) {
            None => Ok(Vec::new()),
            Some(raw) => parse_id_list(raw),
        }
    }
}

pub fn parse_id_list(raw: &str) -> Result<Vec<i64>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().with_context(|| format!("bad id {s:?}")))
        .collect()
}

/// Output directory resolution: flag, then config, then `TRIARB_OUT`, then
/// the current directory.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &Config) -> PathBuf {
    flag.or_else(|| config.get("out.dir").map(PathBuf::from))
        .or_else(|| std::env::var_os("TRIARB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
