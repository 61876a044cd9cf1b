//! Line-oriented `key = value` experiment configs with `#` comments.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Line number used for values supplied on the command line.
pub const COMMAND_LINE: usize = 0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}: {message}", location(*line, key))]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

fn location(line: usize, key: &str) -> String {
    match (line, key.is_empty()) {
        (COMMAND_LINE, true) => "command line".to_string(),
        (COMMAND_LINE, false) => format!("command line, key '{key}'"),
        (l, true) => format!("line {l}"),
        (l, false) => format!("line {l}, key '{key}'"),
    }
}

impl ConfigError {
    pub fn new(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Run,
    WorstcaseSweep,
    DynamicsScan,
    Escape,
    BoundsTable,
    Rates,
    Stochastic,
    Certify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Run,
        ExperimentKind::WorstcaseSweep,
        ExperimentKind::DynamicsScan,
        ExperimentKind::Escape,
        ExperimentKind::BoundsTable,
        ExperimentKind::Rates,
        ExperimentKind::Stochastic,
        ExperimentKind::Certify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::WorstcaseSweep => "worstcase_sweep",
            ExperimentKind::DynamicsScan => "dynamics_scan",
            ExperimentKind::Escape => "escape",
            ExperimentKind::BoundsTable => "bounds_table",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Stochastic => "stochastic",
            ExperimentKind::Certify => "certify",
        }
    }

    /// Name of the matching CLI subcommand.
    /// Whether the experiment draws random numbers and so reads `seed`.
    pub fn uses_seed(self) -> bool {
        matches!(
            self,
            ExperimentKind::Run | ExperimentKind::Escape | ExperimentKind::Stochastic | ExperimentKind::Certify
        )
    }

    pub fn command(self) -> &'static str {
        match self {
            ExperimentKind::WorstcaseSweep => "worstcase",
            ExperimentKind::DynamicsScan => "dynamics",
            ExperimentKind::BoundsTable => "bounds",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    /// Accepts both the config name and the subcommand name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.command() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown experiment kind '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// A parsed config. Typed getters record which keys were read so that
/// misspelled keys can be reported.
#[derive(Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, "", format!("expected 'key = value', found '{content}'")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::new(line, "", "empty key"));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(ConfigError::new(
                    line,
                    key,
                    format!("duplicate key (first set on line {})", prev.line),
                ));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        let kind_entry = entries
            .remove("kind")
            .ok_or_else(|| ConfigError::new(COMMAND_LINE, "kind", "missing required key"))?;
        let kind = kind_entry
            .value
            .parse()
            .map_err(|e: String| ConfigError::new(kind_entry.line, "kind", e))?;
        Ok(Self {
            kind,
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// An empty config of the given kind.
    pub fn empty(kind: ExperimentKind) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
            used: RefCell::new(BTreeSet::new()),
        }
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::new(COMMAND_LINE, "", format!("expected key=value, found '{assignment}'")))?;
        let key = key.trim();
        if key == "kind" {
            return Err(ConfigError::new(COMMAND_LINE, "kind", "the kind is fixed by the subcommand"));
        }
        self.set(key, value.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: COMMAND_LINE,
            },
        );
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key);
        if e.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        e
    }

    pub fn has(&self, key: &str) -> bool {
        self.entry(key).is_some()
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(COMMAND_LINE, |e| e.line)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.line_of(key), key, message)
    }

    pub fn str_opt(&self, key: &str) -> Option<String> {
        self.entry(key).map(|e| e.value.clone())
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.str_opt(key).unwrap_or_else(|| default.to_string())
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| ConfigError::new(e.line, key, format!("cannot parse '{}': {err}", e.value))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(key)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated reals.
    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.entry(key) {
            None => Ok(default.to_vec()),
            Some(e) => parse_list(&e.value).map_err(|m| ConfigError::new(e.line, key, m)),
        }
    }

    /// Comma-separated integers or inclusive ranges `a..b` with optional
    /// step `a..b:s`.
    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>, ConfigError> {
        match self.entry(key) {
            None => Ok(default.to_vec()),
            Some(e) => parse_int_list(&e.value).map_err(|m| ConfigError::new(e.line, key, m)),
        }
    }

    /// Keys present in the config that no getter has read.
    pub fn unused_keys(&self) -> Vec<(String, usize)> {
        let used = self.used.borrow();
        self.entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, e)| (k.clone(), e.line))
            .collect()
    }

    pub fn check_all_used(&self) -> Result<(), ConfigError> {
        match self.unused_keys().into_iter().next() {
            Some((key, line)) => Err(ConfigError::new(
                line,
                &key,
                format!("unknown key for experiment kind {}", self.kind),
            )),
            None => Ok(()),
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("cannot parse '{t}': {e}")))
        .collect()
}

pub fn parse_int_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, rest)) = tok.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((h, st)) => (h, st),
                None => (rest, "1"),
            };
            let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("cannot parse '{x}' in '{tok}': {e}"));
            let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
            if step == 0 || lo > hi {
                return Err(format!("empty or invalid range '{tok}'"));
            }
            out.extend((lo..=hi).step_by(step as usize));
        } else {
            out.push(tok.parse::<u64>().map_err(|e| format!("cannot parse '{tok}': {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_kind() {
        let cfg = ExperimentConfig::parse("# escape run\nkind = escape\ngamma = 1 # inline\n\nK=200\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Escape);
        assert_eq!(cfg.f64_or("gamma", 0.0).unwrap(), 1.0);
        assert_eq!(cfg.u64_or("K", 0).unwrap(), 200);
        assert!(cfg.check_all_used().is_ok());
    }

    #[test]
    fn errors_name_key_and_line() {
        let cfg = ExperimentConfig::parse("kind = escape\ngamma = one\n").unwrap();
        let err = cfg.f64_or("gamma", 1.0).unwrap_err();
        assert_eq!((err.line, err.key.as_str()), (2, "gamma"));
        assert!(err.to_string().contains("line 2, key 'gamma'"));

        let err = ExperimentConfig::parse("gamma = 1\n").unwrap_err();
        assert_eq!(err.key, "kind");
        let err = ExperimentConfig::parse("kind = nope\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = ExperimentConfig::parse("kind = run\njust words\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = ExperimentConfig::parse("kind = run\na = 1\na = 2\n").unwrap_err();
        assert_eq!((err.line, err.key.as_str()), (3, "a"));
    }

    #[test]
    fn unknown_keys_reported() {
        let cfg = ExperimentConfig::parse("kind = run\ngama = 1\n").unwrap();
        let _ = cfg.f64_or("gamma", 1.0);
        let err = cfg.check_all_used().unwrap_err();
        assert_eq!((err.line, err.key.as_str()), (2, "gama"));
    }

    #[test]
    fn subcommand_aliases() {
        assert_eq!("bounds".parse::<ExperimentKind>().unwrap(), ExperimentKind::BoundsTable);
        assert_eq!("bounds_table".parse::<ExperimentKind>().unwrap(), ExperimentKind::BoundsTable);
    }

    #[test]
    fn int_lists_and_ranges() {
        assert_eq!(parse_int_list("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_int_list("2..10:4, 20").unwrap(), vec![2, 6, 10, 20]);
        assert!(parse_int_list("5..1").is_err());
        assert_eq!(parse_list("0.5, 1,1.5").unwrap(), vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = ExperimentConfig::parse("kind = rates\nnu = 1\n").unwrap();
        cfg.set_override("nu=0.5").unwrap();
        assert_eq!(cfg.f64_or("nu", 1.0).unwrap(), 0.5);
        assert!(cfg.set_override("kind=run").is_err());
        assert!(cfg.set_override("novalue").is_err());
    }
}
