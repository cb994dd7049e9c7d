//! Experiment configuration files.
//!
//! ```text
//! # comment
//! [section]
//! key = value            # trailing comments are allowed
//! list = a; b; c         # sweep lists are separated by ';'
//! ```
//!
//! Keys are looked up by `(section, key)`. Every key must be consumed by
//! the command reading the file, so typos are reported instead of ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.msg)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self { line: None, key: None, msg: msg.into() }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct Config {
    base_dir: PathBuf,
    entries: BTreeMap<(String, String), Entry>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl Config {
    /// Parses `text`; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError { line: Some(line), key: None, msg };
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header {content:?}")))?
                    .trim();
                if name.is_empty() {
                    return Err(err("empty section name".into()));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found {content:?}")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err("missing key".into()));
            }
            let sec = section.clone().ok_or_else(|| err(format!("key {key:?} appears before any [section]")))?;
            let slot = (sec.clone(), key.to_string());
            if let Some(prev) = entries.get(&slot) {
                let prev: &Entry = prev;
                return Err(err(format!("[{sec}] {key} already set on line {}", prev.line)));
            }
            entries.insert(slot, Entry { value: value.trim().to_string(), line });
        }
        Ok(Self { base_dir: base_dir.to_path_buf(), entries, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let slot = (section.to_string(), key.to_string());
        let e = self.entries.get(&slot)?;
        self.used.borrow_mut().insert(slot);
        Some(e)
    }

    fn key_error(section: &str, key: &str, e: &Entry, msg: String) -> ConfigError {
        ConfigError { line: Some(e.line), key: Some(format!("[{section}] {key}")), msg }
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.entries.contains_key(&(section.to_string(), key.to_string()))
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| e.value.clone())
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| Self::key_error(section, key, e, format!("cannot parse {:?}: {err}", e.value))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| ConfigError {
            line: None,
            key: Some(format!("[{section}] {key}")),
            msg: "required key is missing".into(),
        })
    }

    /// A non-empty `;`-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let items: Vec<&str> = e.value.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(Self::key_error(section, key, e, "sweep list is empty".into()));
        }
        items
            .into_iter()
            .map(|s| s.parse().map_err(|err| Self::key_error(section, key, e, format!("cannot parse {s:?}: {err}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn require_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.list(section, key)?.ok_or_else(|| ConfigError {
            line: None,
            key: Some(format!("[{section}] {key}")),
            msg: "required key is missing".into(),
        })
    }

    /// A path relative to the config file. With `must_exist` the file is
    /// checked at load time.
    pub fn path(&self, section: &str, key: &str, must_exist: bool) -> Result<Option<PathBuf>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let p = self.resolve(&e.value);
        if must_exist && !p.exists() {
            return Err(Self::key_error(section, key, e, format!("file {} does not exist", p.display())));
        }
        Ok(Some(p))
    }

    /// `;`-separated list of paths, each checked for existence.
    pub fn paths(&self, section: &str, key: &str) -> Result<Option<Vec<PathBuf>>, ConfigError> {
        let Some(items) = self.list::<String>(section, key)? else { return Ok(None) };
        let e = self.entry(section, key).expect("list was present");
        items
            .iter()
            .map(|s| {
                let p = self.resolve(s);
                if p.exists() {
                    Ok(p)
                } else {
                    Err(Self::key_error(section, key, e, format!("file {} does not exist", p.display())))
                }
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Errors on the first key no command read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            None => Ok(()),
            Some(((sec, key), e)) => {
                Err(ConfigError { line: Some(e.line), key: Some(format!("[{sec}] {key}")), msg: "unknown key".into() })
            }
        }
    }
}
