//! Flat `key = value` configuration with command-line overrides.
//!
//! Every command declares the keys it understands together with their
//! defaults. Keys outside that list are rejected, so a misspelled key never
//! silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Key {
    pub name: &'static str,
    pub default: String,
    pub help: &'static str,
}

pub fn key(name: &'static str, default: impl Display, help: &'static str) -> Key {
    Key {
        name,
        default: default.to_string(),
        help,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub command: String,
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{origin}:{}: expected key = value, got {raw:?}", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::config(format!("{origin}:{}: empty key", no + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Config {
    /// Defaults, then the file, then overrides; later sources win.
    pub fn resolve(command: &str, schema: &[Key], file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            schema.iter().map(|k| (k.name.to_string(), k.default.clone())).collect();
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
            pairs.extend(parse_pairs(&text, &path.display().to_string())?);
        }
        for o in overrides {
            pairs.extend(parse_pairs(o, "override")?);
        }
        for (k, v) in pairs {
            match values.get_mut(&k) {
                Some(slot) => *slot = v,
                None => {
                    let known: Vec<&str> = schema.iter().map(|k| k.name).collect();
                    return Err(CliError::config(format!(
                        "unknown key {k:?} for {command}; known keys: {}",
                        known.join(", ")
                    )));
                }
            }
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key {key} is not declared in the schema"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::config(format!("bad value for {key}: {raw:?} ({e})")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CliError::config(format!("bad list entry for {key}: {s:?} ({e})")))
            })
            .collect()
    }

    /// Resolved configuration as a loadable config file.
    pub fn echo(&self, version: &str) -> String {
        let mut s = format!("# elmfin {version}\n# command = {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn describe(schema: &[Key]) -> String {
    let w = schema.iter().map(|k| k.name.len()).max().unwrap_or(0);
    schema
        .iter()
        .map(|k| format!("  {:w$}  {} (default {})\n", k.name, k.help, k.default))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<Key> {
        vec![key("nodes", 100, "hidden nodes"), key("scales", "0.5,1", "scales"), key("name", "run", "label")]
    }

    #[test]
    fn comments_blank_lines_and_spaces() {
        let p = parse_pairs("# header\n\n nodes = 5 # trailing\nname=x\n", "f").unwrap();
        assert_eq!(p, vec![("nodes".into(), "5".into()), ("name".into(), "x".into())]);
    }

    #[test]
    fn line_without_equals_is_rejected() {
        let e = parse_pairs("nodes 5", "f").unwrap_err();
        assert_eq!(e.kind, crate::ErrorKind::Config);
        assert!(e.to_string().contains("f:1"), "{e}");
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let c = Config::resolve("t", &schema(), None, &["nodes=7".into()]).unwrap();
        assert_eq!(c.get::<usize>("nodes").unwrap(), 7);
        assert_eq!(c.list::<f64>("scales").unwrap(), vec![0.5, 1.0]);
        assert!(Config::resolve("t", &schema(), None, &["node=7".into()]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = Config::resolve("t", &schema(), None, &["name=abc".into(), "scales=".into()]).unwrap();
        let again = parse_pairs(&c.echo("v"), "echo").unwrap();
        let orig: Vec<(String, String)> = c.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        assert_eq!(again, orig);
        assert!(c.list::<f64>("scales").unwrap().is_empty());
    }

    #[test]
    fn bad_value_is_a_config_error() {
        let c = Config::resolve("t", &schema(), None, &["nodes=lots".into()]).unwrap();
        assert_eq!(c.get::<usize>("nodes").unwrap_err().exit_code(), 2);
    }
}
