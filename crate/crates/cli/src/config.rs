//! Flat key=value configuration files mirroring the command-line flags.
//!
//! Precedence: explicit flags override file values, file values override
//! built-in defaults. Unknown keys are rejected by name.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Every flag any subcommand understands; config files share one namespace.
const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "cov",
    "dim",
    "eta-true",
    "features",
    "images-max",
    "images-min",
    "init",
    "k",
    "links",
    "log-every",
    "max-iters",
    "method",
    "model",
    "nu-true",
    "omit-phi",
    "out-dir",
    "per-topic",
    "rho",
    "seed",
    "separation",
    "sigma",
    "split-out",
    "top-n",
    "train-ratio",
    "user",
    "users",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Settings { values });
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value, got {line:?}", path.display(), idx + 1);
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                bail!("{}:{}: unknown config key {key:?}", path.display(), idx + 1);
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Settings { values })
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}={raw:?}: {e}"),
            },
        }
    }

    /// Flag wins, then the file, then the default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(flag.or(self.parsed(key)?).unwrap_or(default))
    }

    /// Flag wins, then the file; stays `None` when neither is present.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(flag.or(self.parsed(key)?))
    }

    /// Flag wins, then the file; errors when neither is present.
    pub fn resolve_required<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.resolve_opt(flag, key)? {
            Some(v) => Ok(v),
            None => bail!("missing required option --{key} (flag or config file)"),
        }
    }

    /// Presence-style boolean: the flag can only turn it on.
    pub fn resolve_switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.parsed(key)?.unwrap_or(false))
    }
}
