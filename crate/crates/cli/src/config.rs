//! `key = value` run configuration files.
//!
//! Blank lines and text after `#` are ignored. Every key must be one of
//! [`KEYS`] and its value must parse as the key's type. Command-line flags
//! override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Text,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Int => "integer",
            Kind::Float => "number",
            Kind::Bool => "true/false",
            Kind::Text => "text",
        })
    }
}

/// Recognized keys, their types and meanings.
pub const KEYS: &[(&str, Kind, &str)] = &[
    ("seed", Kind::Int, "master seed"),
    ("views", Kind::Int, "images per synthetic instance"),
    ("points", Kind::Int, "universe points per instance (also the embedding width)"),
    ("descriptor_dim", Kind::Int, "descriptor length"),
    ("descriptor_noise", Kind::Float, "node feature noise sigma"),
    ("edge_noise", Kind::Float, "adjacency noise sigma"),
    ("outliers", Kind::Float, "fraction of rewired true matches"),
    ("source", Kind::Text, "training instances: graph or scene"),
    ("steps", Kind::Int, "training steps"),
    ("lr0", Kind::Float, "base learning rate"),
    ("decay", Kind::Float, "per-step learning-rate decay"),
    ("beta1", Kind::Float, "Adam first-moment decay"),
    ("beta2", Kind::Float, "Adam second-moment decay"),
    ("adam_eps", Kind::Float, "Adam epsilon"),
    ("lambda_geom", Kind::Float, "geometric loss weight"),
    ("geometric", Kind::Bool, "train with the geometric loss"),
    ("groupnorm", Kind::Bool, "use group normalization"),
    ("eval_every", Kind::Int, "steps between held-out evaluations"),
    ("eval_graphs", Kind::Int, "held-out graphs per evaluation"),
    ("hidden", Kind::Int, "hidden width"),
    ("layers", Kind::Int, "GCN layers"),
    ("groups", Kind::Int, "group-norm groups"),
    ("method", Kind::Text, "baseline: spectral, matchals or pgdds"),
    ("iters", Kind::Int, "baseline iterations"),
    ("mu", Kind::Float, "matchals ridge weight"),
    ("step", Kind::Float, "pgdds step size"),
    ("instances", Kind::Int, "instances per sweep"),
    ("directions", Kind::Int, "gradient-check directions"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: String, msg: String },
    Syntax { line: usize, msg: String },
    UnknownKey { line: usize, key: String },
    TypeError { line: usize, key: String, expected: Kind, value: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, msg } => write!(f, "cannot read config {path}: {msg}"),
            ConfigError::Syntax { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::UnknownKey { line, key } => write!(f, "config line {line}: unknown key {key:?}"),
            ConfigError::TypeError { line, key, expected, value } => write!(
                f,
                "config line {line}: {key} expects {expected}, got {value:?}"
            ),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, kind, _)| *kind)
}

fn type_checks(kind: Kind, value: &str) -> bool {
    match kind {
        Kind::Int => value.parse::<u64>().is_ok(),
        Kind::Float => value.parse::<f64>().is_ok_and(f64::is_finite),
        Kind::Bool => value.parse::<bool>().is_ok(),
        Kind::Text => !value.is_empty(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected `key = value`, got {content:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })?;
            if !type_checks(kind, value) {
                return Err(ConfigError::TypeError {
                    line,
                    key: key.to_string(),
                    expected: kind,
                    value: value.to_string(),
                });
            }
            values.insert(key.to_string(), value.to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The file value of `key`; values were type-checked on load.
    pub fn get<T: FromStr>(&self, key: &str) -> Option<T> {
        debug_assert!(kind_of(key).is_some(), "undocumented key {key}");
        self.values.get(key).and_then(|v| v.parse().ok())
    }

    /// Flag if given, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> T {
        flag.or_else(|| self.get(key)).unwrap_or(default)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    RunConfig::parse(&text)
}

/// Help text listing every key.
pub fn key_help() -> String {
    let mut out = String::from("config keys:\n");
    for (key, kind, doc) in KEYS {
        out.push_str(&format!("  {key:<17} {kind:<10} {doc}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.pick(None, "steps", 7usize), 7);
        assert!(RunConfig::parse("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn parses_learning_rate() {
        let c = RunConfig::parse("lr0 = 1e-4\n").unwrap();
        assert_eq!(c.get::<f64>("lr0"), Some(1e-4));
    }

    #[test]
    fn flags_win() {
        let c = RunConfig::parse("steps = 10 # trailing comment\ngeometric = true").unwrap();
        assert_eq!(c.pick(Some(3usize), "steps", 1), 3);
        assert_eq!(c.pick(None, "steps", 1usize), 10);
        assert!(c.pick(None, "geometric", false));
    }

    #[test]
    fn type_errors_name_the_line() {
        let err = RunConfig::parse("steps = 5\nlr0 = banana\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::TypeError {
                line: 2,
                key: "lr0".into(),
                expected: Kind::Float,
                value: "banana".into()
            }
        );
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn unknown_keys_and_syntax() {
        assert_eq!(
            RunConfig::parse("\nbogus = 1").unwrap_err(),
            ConfigError::UnknownKey {
                line: 2,
                key: "bogus".into()
            }
        );
        assert!(matches!(
            RunConfig::parse("steps 5"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("steps = -1"),
            Err(ConfigError::TypeError { .. })
        ));
    }
}
