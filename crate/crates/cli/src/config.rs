//! Flat key-value configuration files with `[section]` headers.
//!
//! Keys may repeat within a section (used by `samples` entries and criteria
//! `require` lines). Command-line flags override file values. Unknown
//! sections and keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::runtime(format!("reading config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut sections: Vec<(String, Vec<(String, String)>)> = Vec::new();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                sections.push((name.trim().to_owned(), Vec::new()));
                current = Some(sections.len() - 1);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {}: expected `key = value`, found {line:?}",
                    i + 1
                )));
            };
            let Some(idx) = current else {
                return Err(CliError::usage(format!(
                    "config line {}: key outside any [section]",
                    i + 1
                )));
            };
            sections[idx]
                .1
                .push((key.trim().to_owned(), value.trim().to_owned()));
        }
        Ok(ConfigFile { sections })
    }

    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, kv)| kv.as_slice())
    }

    /// Last value wins for scalar keys.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.section(section)
            .map(|kv| {
                kv.iter()
                    .filter(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Reject unknown sections and, for the command's own section, unknown
    /// keys. Criteria sections only accept `require` lines.
    pub fn validate(&self, command_section: &str, allowed_keys: &[&str]) -> Result<(), CliError> {
        for (name, kv) in &self.sections {
            if let Some(criteria_name) = name.strip_prefix("criteria.") {
                if criteria_name.is_empty() {
                    return Err(CliError::usage("criteria section needs a name"));
                }
                for (k, _) in kv {
                    if k != "require" {
                        return Err(CliError::usage(format!(
                            "unknown key {k:?} in [{name}] (only `require` is allowed)"
                        )));
                    }
                }
                continue;
            }
            if !["train", "sample", "eval", "search"].contains(&name.as_str()) {
                return Err(CliError::usage(format!("unknown config section [{name}]")));
            }
            if name == command_section {
                for (k, _) in kv {
                    if !allowed_keys.contains(&k.as_str()) {
                        return Err(CliError::usage(format!(
                            "unknown key {k:?} in [{name}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Merged effective settings, rendered canonically into the run directory.
#[derive(Debug, Default, Clone)]
pub struct Effective {
    values: BTreeMap<String, String>,
}

impl Effective {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_owned(), value.to_string());
    }

    pub fn render(&self, section: &str) -> String {
        let mut out = format!("[{section}]\n");
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// flag > config > default, with parse errors reported as usage errors.
pub fn merge<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: Option<&str>,
    default: T,
    key: &str,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg {
        Some(raw) => raw
            .parse()
            .map_err(|_| CliError::usage(format!("bad value {raw:?} for {key}"))),
        None => Ok(default),
    }
}

/// Same, for optional settings without a default.
pub fn merge_opt<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: Option<&str>,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg {
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("bad value {raw:?} for {key}"))),
        None => Ok(None),
    }
}

pub fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required setting {key}")))
}
