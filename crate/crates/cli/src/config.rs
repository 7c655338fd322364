//! Flat `key = value` config files.
//!
//! Keys are the long flag names without the leading dashes (`iters`,
//! `min-seg`, `prior`, ...). Blank lines and lines starting with `#` are
//! ignored. A flag given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        ConfigFile::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key '{key}': cannot parse '{v}': {e}")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                other => Err(CliError::Usage(format!("config key '{key}': expected a boolean, got '{other}'"))),
            },
        }
    }
}

/// Flag value, else config value, else the default.
pub fn resolve<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.get(key)?.unwrap_or(default)),
    }
}

pub fn resolve_opt<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let file = ConfigFile::parse("# comment\niters = 200\nmin_seg=7\n\nstandardize = yes\n").unwrap();
        assert_eq!(resolve(None, &file, "iters", 10usize).unwrap(), 200);
        assert_eq!(resolve(Some(50), &file, "iters", 10usize).unwrap(), 50);
        assert_eq!(resolve(None, &file, "min-seg", 1usize).unwrap(), 7);
        assert_eq!(resolve(None, &file, "seed", 3u64).unwrap(), 3);
        assert!(file.flag("standardize").unwrap());
        assert!(ConfigFile::parse("nonsense").is_err());
        assert!(resolve(None, &ConfigFile::parse("iters = x").unwrap(), "iters", 1usize).is_err());
    }
}
