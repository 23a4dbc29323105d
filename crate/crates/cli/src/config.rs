//! Flat `key = value` files with `[section]` blocks.
//!
//! ```text
//! # comments run to end of line
//! case = 2
//! steps = 40
//!
//! [initial]
//! mean = 3 3 0 0
//! cov_diag = 0.02 0.02 0.1 0.1
//! weight = 1
//! ```
//!
//! Every `[section]` header opens a new block; keys before the first header
//! are top-level. Lists are whitespace or comma separated.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

/// Keys of one scope (top level or one block), consumed by typed getters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Scope {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Line of the section header (0 for the top level).
    pub fn line(&self) -> usize {
        self.line
    }

    fn find(&mut self, key: &str) -> Option<&mut Entry> {
        self.entries.iter_mut().find(|e| e.key == key)
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> ConfigResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.find(key) {
            None => Ok(None),
            Some(e) => {
                e.used = true;
                e.value
                    .parse()
                    .map(Some)
                    .map_err(|err| syntax(e.line, format!("bad value for `{key}`: {err}")))
            }
        }
    }

    pub fn get_list(&mut self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        match self.find(key) {
            None => Ok(None),
            Some(e) => {
                e.used = true;
                let line = e.line;
                e.value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|err| syntax(line, format!("bad number `{s}` in `{key}`: {err}")))
                    })
                    .collect::<ConfigResult<Vec<_>>>()
                    .map(Some)
            }
        }
    }

    /// Like [`Scope::get_list`] but checks the length.
    pub fn get_list_of(&mut self, key: &str, lens: &[usize]) -> ConfigResult<Option<Vec<f64>>> {
        let line = self.find(key).map(|e| e.line).unwrap_or(self.line);
        match self.get_list(key)? {
            Some(v) if !lens.contains(&v.len()) => Err(syntax(
                line,
                format!("`{key}` needs {} values, got {}", describe(lens), v.len()),
            )),
            other => Ok(other),
        }
    }

    /// Errors on the first key no getter asked for.
    pub fn finish(&self) -> ConfigResult<()> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => {
                let place = if self.name.is_empty() {
                    String::new()
                } else {
                    format!(" in [{}]", self.name)
                };
                Err(syntax(e.line, format!("unknown key `{}`{place}", e.key)))
            }
            None => Ok(()),
        }
    }
}

fn describe(lens: &[usize]) -> String {
    lens.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" or ")
}

/// A parsed file: top-level keys plus blocks in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub top: Scope,
    pub blocks: Vec<Scope>,
}

impl Document {
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut top = Scope {
            name: String::new(),
            line: 0,
            entries: Vec::new(),
        };
        let mut blocks: Vec<Scope> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line, "section header needs a closing `]`"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(syntax(line, format!("bad section name `{name}`")));
                }
                blocks.push(Scope {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(line, "expected `key = value` or `[section]`"))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(syntax(line, format!("bad key `{key}`")));
            }
            if value.is_empty() {
                return Err(syntax(line, format!("`{key}` has no value")));
            }
            let scope = blocks.last_mut().unwrap_or(&mut top);
            if scope.entries.iter().any(|e| e.key == key) {
                return Err(syntax(line, format!("duplicate key `{key}`")));
            }
            scope.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
                used: false,
            });
        }
        Ok(Self { top, blocks })
    }

    /// Checks every block name is one of `allowed`.
    pub fn check_sections(&self, allowed: &[&str]) -> ConfigResult<()> {
        for b in &self.blocks {
            if !allowed.contains(&b.name.as_str()) {
                return Err(syntax(
                    b.line,
                    format!("unknown section [{}] (expected one of: {})", b.name, allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }
}
