//! Experiment configuration: a flat TOML table of typed keys, overridden
//! by command-line flags.
//!
//! ```toml
//! command = "threshold"
//! seed = 7
//! tolerance_scale = 1.0
//! lo = 0.0
//! hi = 2.0
//! tol = 1e-6
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Ward,
    Threshold,
    Energy,
    Residual,
    Bounds,
    Laplacian,
    Ode,
    Flow,
    Suite,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Spectrum,
        Command::Ward,
        Command::Threshold,
        Command::Energy,
        Command::Residual,
        Command::Bounds,
        Command::Laplacian,
        Command::Ode,
        Command::Flow,
        Command::Suite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Ward => "ward",
            Command::Threshold => "threshold",
            Command::Energy => "energy",
            Command::Residual => "residual",
            Command::Bounds => "bounds",
            Command::Laplacian => "laplacian",
            Command::Ode => "ode",
            Command::Flow => "flow",
            Command::Suite => "suite",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
}

/// `(command, key, kind)` for every command-specific parameter.
pub const SCHEMA: &[(Command, &str, Kind)] = &[
    (Command::Spectrum, "n_min", Kind::Int),
    (Command::Spectrum, "n_max", Kind::Int),
    (Command::Spectrum, "kind", Kind::Str),
    (Command::Ward, "alpha_min", Kind::Float),
    (Command::Ward, "alpha_max", Kind::Float),
    (Command::Ward, "points", Kind::Int),
    (Command::Threshold, "lo", Kind::Float),
    (Command::Threshold, "hi", Kind::Float),
    (Command::Threshold, "tol", Kind::Float),
    (Command::Energy, "map", Kind::Str),
    (Command::Energy, "torus_size", Kind::Int),
    (Command::Energy, "hopf_size", Kind::Int),
    (Command::Energy, "product_size", Kind::Int),
    (Command::Residual, "map", Kind::Str),
    (Command::Residual, "torus_size", Kind::Int),
    (Command::Residual, "hopf_size", Kind::Int),
    (Command::Residual, "product_size", Kind::Int),
    (Command::Bounds, "maps_2d", Kind::Int),
    (Command::Bounds, "maps_4d", Kind::Int),
    (Command::Bounds, "size_2d", Kind::Int),
    (Command::Bounds, "size_4d", Kind::Int),
    (Command::Laplacian, "dim", Kind::Int),
    (Command::Laplacian, "size", Kind::Int),
    (Command::Laplacian, "degree", Kind::Int),
    (Command::Ode, "glued", Kind::Bool),
    (Command::Ode, "integrate", Kind::Bool),
    (Command::Ode, "t_small", Kind::Float),
    (Command::Ode, "t_large", Kind::Float),
    (Command::Ode, "points", Kind::Int),
    (Command::Ode, "h", Kind::Float),
    (Command::Ode, "t_end", Kind::Float),
    (Command::Flow, "target", Kind::Str),
    (Command::Flow, "size", Kind::Int),
    (Command::Flow, "steps", Kind::Int),
    (Command::Flow, "dt", Kind::Float),
    (Command::Suite, "criteria", Kind::Str),
];

/// Keys accepted at the top level of a config file for every command.
pub const GLOBAL_KEYS: &[&str] = &["command", "seed", "threads", "tolerance_scale", "out"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: Params,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

/// Global settings as given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub tolerance_scale: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub params: BTreeMap<String, toml::Value>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            params: Params::default(),
            seed: 0,
            tolerance_scale: 1.0,
            threads: None,
            out: PathBuf::from("results"),
        }
    }

    /// Merges an optional config file with flag overrides; flags win.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let command = match (flags.command, table.remove("command")) {
            (Some(c), _) => c,
            (None, Some(toml::Value::String(s))) => Command::parse(&s)?,
            (None, Some(v)) => return Err(CliError::Config(format!("command must be a string, got {v}"))),
            (None, None) => return Err(CliError::Config("no command given".into())),
        };
        let mut cfg = ExperimentConfig::new(command);
        if let Some(v) = table.remove("seed") {
            cfg.seed = as_int(&v, "seed")
                .and_then(|i| u64::try_from(i).map_err(|_| CliError::Config("seed must be non-negative".into())))?;
        }
        if let Some(v) = table.remove("tolerance_scale") {
            cfg.tolerance_scale = as_float(&v, "tolerance_scale")?;
        }
        if let Some(v) = table.remove("threads") {
            let t = as_int(&v, "threads")?;
            cfg.threads = Some(usize::try_from(t).map_err(|_| CliError::Config("threads must be positive".into()))?);
        }
        if let Some(v) = table.remove("out") {
            match v {
                toml::Value::String(s) => cfg.out = PathBuf::from(s),
                other => return Err(CliError::Config(format!("out must be a string, got {other}"))),
            }
        }
        cfg.seed = flags.seed.unwrap_or(cfg.seed);
        cfg.tolerance_scale = flags.tolerance_scale.unwrap_or(cfg.tolerance_scale);
        cfg.threads = flags.threads.or(cfg.threads);
        if let Some(out) = flags.out {
            cfg.out = out;
        }
        let mut params: BTreeMap<String, toml::Value> = table.into_iter().collect();
        params.extend(flags.params);
        cfg.params = Params::new(command, params)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tolerance_scale > 0.0 && self.tolerance_scale.is_finite()) {
            return Err(CliError::Config(format!(
                "tolerance_scale must be positive, got {}",
                self.tolerance_scale
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

fn as_int(v: &toml::Value, key: &str) -> Result<i64, CliError> {
    v.as_integer()
        .ok_or_else(|| CliError::Config(format!("{key} must be an integer, got {v}")))
}

fn as_float(v: &toml::Value, key: &str) -> Result<f64, CliError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(CliError::Config(format!("{key} must be a number, got {v}"))),
    }
}

/// Command-specific parameters, checked against [`SCHEMA`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, toml::Value>,
}

impl Params {
    pub fn new(command: Command, values: BTreeMap<String, toml::Value>) -> Result<Self, CliError> {
        for (key, value) in &values {
            let kind = SCHEMA
                .iter()
                .find(|(c, k, _)| *c == command && k == key)
                .map(|x| x.2)
                .ok_or_else(|| CliError::Config(format!("unknown parameter {key:?} for command {}", command.name())))?;
            let ok = match kind {
                Kind::Int => value.is_integer(),
                Kind::Float => value.is_float() || value.is_integer(),
                Kind::Bool => value.is_bool(),
                Kind::Str => value.is_str(),
            };
            if !ok {
                return Err(CliError::Config(format!(
                    "parameter {key:?} has the wrong type: {value}"
                )));
            }
        }
        Ok(Params { values })
    }

    pub fn values(&self) -> &BTreeMap<String, toml::Value> {
        &self.values
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => {
                usize::try_from(as_int(v, key)?).map_err(|_| CliError::Config(format!("{key} must be non-negative")))
            }
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => as_float(v, key),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| CliError::Config(format!("{key} must be a boolean"))),
        }
    }

    pub fn str<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_str()
                .ok_or_else(|| CliError::Config(format!("{key} must be a string"))),
        }
    }
}

pub fn check_positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {x}")))
    }
}

pub fn check_grid(name: &str, n: usize) -> Result<usize, CliError> {
    if n >= 4 {
        Ok(n)
    } else {
        Err(CliError::Config(format!("{name} must be at least 4, got {n}")))
    }
}

pub fn check_range(name: &str, lo: f64, hi: f64) -> Result<(), CliError> {
    if lo < hi && lo.is_finite() && hi.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} range [{lo}, {hi}] is empty")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "command = \"threshold\"\nseed = 3\nlo = 0.5\ntol = 1e-4\n").unwrap();
        let mut flags = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        flags.params.insert("tol".into(), toml::Value::Float(1e-8));
        let cfg = ExperimentConfig::resolve(Some(&path), flags).unwrap();
        assert_eq!(cfg.command, Command::Threshold);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.params.f64("lo", 0.0).unwrap(), 0.5);
        assert_eq!(cfg.params.f64("tol", 0.0).unwrap(), 1e-8);
        assert_eq!(cfg.params.f64("hi", 2.0).unwrap(), 2.0);
    }

    #[test]
    fn rejects_unknown_and_mistyped_keys() {
        let mut flags = Overrides {
            command: Some(Command::Spectrum),
            ..Default::default()
        };
        flags.params.insert("lo".into(), toml::Value::Float(1.0));
        assert!(matches!(
            ExperimentConfig::resolve(None, flags),
            Err(CliError::Config(_))
        ));
        let mut flags = Overrides {
            command: Some(Command::Spectrum),
            ..Default::default()
        };
        flags.params.insert("n_max".into(), toml::Value::String("x".into()));
        assert!(matches!(
            ExperimentConfig::resolve(None, flags),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::resolve(None, Overrides::default()),
            Err(CliError::Config(_))
        ));
        let flags = Overrides {
            command: Some(Command::Ode),
            tolerance_scale: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(
            ExperimentConfig::resolve(None, flags),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn schema_covers_every_command_name() {
        for c in Command::ALL {
            assert_eq!(Command::parse(c.name()).unwrap(), c);
        }
        assert!(Command::parse("nope").is_err());
    }
}
