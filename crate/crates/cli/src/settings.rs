//! Layered settings: built-in defaults, then a named preset, then a config
//! file, then command-line flags.
//!
//! Config file grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Keys are the long flag names with `-` replaced by `_`. Values may be
//! wrapped in double quotes. Blank lines and `#` comments are ignored; a
//! key may appear only once.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;

/// Every key a config file or preset may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "probability",
    "dt",
    "rule",
    "scales",
    "lowpass_power",
    "order",
    "moments",
    "format",
    "k",
    "search",
    "trees",
    "leaf_size",
    "symmetrize",
    "n_landmarks",
    "decay",
    "knn",
    "t",
    "t_max",
    "mds_max_iter",
    "delta",
    "epsilon",
    "learning_rate",
    "max_iter",
    "scale_targets",
    "K",
    "mode",
    "eps",
    "min_samples",
    "threshold",
    "reaction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Two-stranded helix association (δ 0.0004, ε 0.00004, eps 0.0034).
    #[value(name = "gao-p4t4")]
    GaoP4t4,
    /// Two-stranded hybridization (δ 0.0001, ε 0.0001).
    #[value(name = "hata-39")]
    Hata39,
    /// Three-way strand displacement (δ 0.0004, ε 0.00001).
    #[value(name = "machinek")]
    Machinek,
}

impl Preset {
    pub fn entries(self) -> Vec<(&'static str, &'static str)> {
        let mut shared = vec![
            ("k", "100"),
            ("min_samples", "4"),
            ("n_landmarks", "2000"),
            ("decay", "40"),
            ("knn", "5"),
        ];
        let own: &[(&str, &str)] = match self {
            Preset::GaoP4t4 => &[
                ("reaction", "gao-p4t4"),
                ("delta", "0.0004"),
                ("epsilon", "0.00004"),
                ("eps", "0.0034"),
                ("threshold", "0.0005"),
            ],
            Preset::Hata39 => &[
                ("reaction", "hata-39"),
                ("delta", "0.0001"),
                ("epsilon", "0.0001"),
            ],
            Preset::Machinek => &[
                ("reaction", "machinek"),
                ("delta", "0.0004"),
                ("epsilon", "0.00001"),
            ],
        };
        shared.extend_from_slice(own);
        shared
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim();
        let mut value = value.trim();
        if let Some(stripped) = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')) {
            value = stripped;
        }
        if !KNOWN_KEYS.contains(&key) {
            bail!("line {}: unknown key `{key}`", n + 1);
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
    }
    Ok(out)
}

impl Settings {
    pub fn load(preset: Option<Preset>, config: Option<&Path>) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(p) = preset {
            for (k, v) in p.entries() {
                values.insert(k.to_string(), v.to_string());
            }
        }
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
            values.extend(file);
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the layered setting, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("setting `{key}` = {v:?}: {e}")),
        }
    }

    /// Like [`Settings::pick`] for clap value enums.
    pub fn pick_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(f) = flag {
            return Ok(f);
        }
        match self.raw(key) {
            None => Ok(default),
            Some(v) => T::from_str(v, true).map_err(|e| anyhow!("setting `{key}`: {e}")),
        }
    }

    /// Comma-separated list from a flag or setting.
    pub fn pick_list<T>(&self, flag: Vec<T>, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(Some(flag));
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| anyhow!("setting `{key}`: {e}")))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}
