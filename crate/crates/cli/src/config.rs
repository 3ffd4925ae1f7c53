//! Run configuration: a flat `key=value` map with a canonical text form.
//!
//! Flags and config files both reduce to the same map, so
//! `RunConfig::parse(&cfg.serialize())` always gives back `cfg`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qvlab::rates::{doubling, SequenceKind};
use qvlab::simulation::TestFunction;
use qvlab::ModelKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("key `{0}` given twice")]
    DuplicateKey(String),

    #[error("invalid value `{value}` for `{key}`: {msg}")]
    Value { key: String, value: String, msg: String },

    #[error("missing required key `{0}`")]
    Missing(&'static str),

    #[error("{0}")]
    Conflict(String),

    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Keys in canonical order.
pub const KEYS: [&str; 16] = [
    "subcommand",
    "model",
    "hurst",
    "hp",
    "k",
    "grid",
    "n-list",
    "reps",
    "seed",
    "use",
    "phi",
    "constant",
    "format",
    "out",
    "raw",
    "threads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Cumulants,
    Rates,
    Simulate,
    Asclt,
    Hypothesis,
}

impl Subcommand {
    pub fn label(self) -> &'static str {
        match self {
            Subcommand::Cumulants => "cumulants",
            Subcommand::Rates => "rates",
            Subcommand::Simulate => "simulate",
            Subcommand::Asclt => "asclt",
            Subcommand::Hypothesis => "hypothesis",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cumulants" => Ok(Subcommand::Cumulants),
            "rates" => Ok(Subcommand::Rates),
            "simulate" => Ok(Subcommand::Simulate),
            "asclt" => Ok(Subcommand::Asclt),
            "hypothesis" => Ok(Subcommand::Hypothesis),
            _ => Err("expected cumulants, rates, simulate, asclt or hypothesis".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn label(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err("expected csv or json".into()),
        }
    }
}

/// Model kind plus whichever parameters it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hurst: Option<f64>,
    pub hp: Option<f64>,
    pub k: Option<f64>,
    pub grid: Option<PathBuf>,
}

/// `n` values: a single size, a comma list, or `a:b:x2` doubling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NList(pub Vec<usize>);

impl FromStr for NList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let positive = |t: &str| -> Result<usize, String> {
            match t.trim().parse::<usize>() {
                Ok(0) => Err("sizes must be positive".into()),
                Ok(v) => Ok(v),
                Err(e) => Err(format!("`{t}`: {e}")),
            }
        };
        if let Some((range, step)) = s.rsplit_once(':') {
            if step != "x2" {
                return Err("only the `x2` doubling step is supported".into());
            }
            let (a, b) = range.split_once(':').ok_or("expected a:b:x2")?;
            let (a, b) = (positive(a)?, positive(b)?);
            if a > b {
                return Err(format!("start {a} exceeds end {b}"));
            }
            return Ok(NList(doubling(a, b)));
        }
        let v = s.split(',').map(positive).collect::<Result<Vec<_>, _>>()?;
        Ok(NList(v))
    }
}

impl fmt::Display for NList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let is_doubling = v.len() > 1 && v.windows(2).all(|w| w[0].checked_mul(2) == Some(w[1]));
        if is_doubling {
            write!(f, "{}:{}:x2", v[0], v[v.len() - 1])
        } else {
            let parts: Vec<String> = v.iter().map(|n| n.to_string()).collect();
            f.write_str(&parts.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub model: ModelSpec,
    pub n_list: Option<NList>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub use_: Option<SequenceKind>,
    pub phi: Option<TestFunction>,
    /// Fixed `C'` for the hypothesis checks; fitted when absent.
    pub constant: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub type ConfigMap = BTreeMap<String, String>;

/// Reads `key=value` lines. Blank lines and `#` comments are skipped; `n` is
/// accepted as an alias of `n-list`.
pub fn parse_kv(text: &str) -> Result<ConfigMap, ConfigError> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let key = normalize_key(k.trim())?;
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }
    Ok(map)
}

pub fn read_kv_file(path: &Path) -> Result<ConfigMap, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_kv(&text)
}

pub fn normalize_key(k: &str) -> Result<String, ConfigError> {
    let k = k.replace('_', "-");
    let k = if k == "n" { "n-list".to_string() } else { k };
    if KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(ConfigError::UnknownKey(k))
    }
}

fn take<T: FromStr>(map: &ConfigMap, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), value: v.clone(), msg: e.to_string() })
        })
        .transpose()
}

fn forbid(kind: ModelKind, key: &str, present: bool) -> Result<(), ConfigError> {
    if present {
        Err(ConfigError::Conflict(format!("`{key}` does not apply to model `{}`", kind.label())))
    } else {
        Ok(())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_map(&parse_kv(text)?)
    }

    pub fn from_map(map: &ConfigMap) -> Result<Self, ConfigError> {
        for key in map.keys() {
            normalize_key(key)?;
        }
        let subcommand: Subcommand = take(map, "subcommand")?.ok_or(ConfigError::Missing("subcommand"))?;
        let kind: ModelKind = take(map, "model")?.ok_or(ConfigError::Missing("model"))?;
        let model = ModelSpec {
            kind,
            hurst: take(map, "hurst")?,
            hp: take(map, "hp")?,
            k: take(map, "k")?,
            grid: take(map, "grid")?,
        };
        match kind {
            ModelKind::Fbm | ModelKind::SubFbm => {
                model.hurst.ok_or(ConfigError::Missing("hurst"))?;
                forbid(kind, "hp", model.hp.is_some())?;
                forbid(kind, "k", model.k.is_some())?;
                forbid(kind, "grid", model.grid.is_some())?;
            }
            ModelKind::BiFbm | ModelKind::GenSubFbm => {
                model.hp.ok_or(ConfigError::Missing("hp"))?;
                model.k.ok_or(ConfigError::Missing("k"))?;
                forbid(kind, "hurst", model.hurst.is_some())?;
                forbid(kind, "grid", model.grid.is_some())?;
            }
            ModelKind::Tabulated => {
                model.hurst.ok_or(ConfigError::Missing("hurst"))?;
                model.grid.as_ref().ok_or(ConfigError::Missing("grid"))?;
                forbid(kind, "hp", model.hp.is_some())?;
                forbid(kind, "k", model.k.is_some())?;
            }
        }
        let n_list: Option<NList> = take(map, "n-list")?;
        if n_list.as_ref().is_some_and(|l| l.0.is_empty()) {
            return Err(ConfigError::Value { key: "n-list".into(), value: String::new(), msg: "empty".into() });
        }
        let reps: Option<usize> = take(map, "reps")?;
        if reps == Some(0) {
            return Err(ConfigError::Value { key: "reps".into(), value: "0".into(), msg: "must be positive".into() });
        }
        let threads: Option<usize> = take(map, "threads")?;
        if threads == Some(0) {
            return Err(ConfigError::Value { key: "threads".into(), value: "0".into(), msg: "must be positive".into() });
        }
        let cfg = RunConfig {
            subcommand,
            model,
            n_list,
            reps,
            seed: take(map, "seed")?,
            use_: take(map, "use")?,
            phi: take(map, "phi")?,
            constant: take(map, "constant")?,
            format: take(map, "format")?,
            out: take(map, "out")?,
            raw: take(map, "raw")?,
            threads,
        };
        if cfg.raw.is_some() && cfg.subcommand != Subcommand::Simulate {
            return Err(ConfigError::Conflict("`raw` only applies to `simulate`".into()));
        }
        Ok(cfg)
    }

    pub fn to_map(&self) -> ConfigMap {
        let mut map = ConfigMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("subcommand", Some(self.subcommand.label().into()));
        put("model", Some(self.model.kind.label().into()));
        put("hurst", self.model.hurst.map(|v| v.to_string()));
        put("hp", self.model.hp.map(|v| v.to_string()));
        put("k", self.model.k.map(|v| v.to_string()));
        put("grid", path(&self.model.grid));
        put("n-list", self.n_list.as_ref().map(|l| l.to_string()));
        put("reps", self.reps.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("use", self.use_.map(|v| v.label().into()));
        put("phi", self.phi.map(|v| v.id().into()));
        put("constant", self.constant.map(|v| v.to_string()));
        put("format", self.format.map(|v| v.label().into()));
        put("out", path(&self.out));
        put("raw", path(&self.raw));
        put("threads", self.threads.map(|v| v.to_string()));
        map
    }

    /// Canonical text: one `key=value` per line in [`KEYS`] order.
    pub fn serialize(&self) -> String {
        let map = self.to_map();
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = map.get(key) {
                out.push_str(key);
                out.push('=');
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(match self.subcommand {
            Subcommand::Rates | Subcommand::Hypothesis => Format::Json,
            _ => Format::Csv,
        })
    }
}
