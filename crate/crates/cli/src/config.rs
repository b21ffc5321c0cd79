//! `key = value` config files. Keys match long flag names; `_` and `-` are
//! interchangeable. A flag given on the command line wins over the file,
//! which wins over the built-in default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn canonical(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got {raw:?}", n + 1);
            };
            values.insert(canonical(k), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text)
            }
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.resolve_opt(flag, key)?.unwrap_or(default))
    }

    /// Like `resolve` for settings that may stay unset.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(&canonical(key)) {
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key} = {s:?}: {e}")),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let cfg = ConfigFile::parse("epochs = 7\n# comment\nlambda_2=0.5  # trailing\n").unwrap();
        assert_eq!(cfg.resolve(None, "epochs", 100usize).unwrap(), 7);
        assert_eq!(cfg.resolve(Some(3), "epochs", 100usize).unwrap(), 3);
        assert_eq!(cfg.resolve(None, "lambda-2", 1.0).unwrap(), 0.5);
        assert_eq!(cfg.resolve(None, "seed", 42u64).unwrap(), 42);
        assert_eq!(cfg.resolve_opt::<f64>(None, "final-lr").unwrap(), None);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ConfigFile::parse("epochs 7").is_err());
        let cfg = ConfigFile::parse("epochs = many").unwrap();
        assert!(cfg.resolve(None, "epochs", 1usize).is_err());
    }
}
