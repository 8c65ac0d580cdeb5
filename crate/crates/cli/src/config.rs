//! Experiment configuration files.
//!
//! A flat `key = value` format grouped under `[section]` headers; `#` starts
//! a comment. Every key is mandatory except `smoother.target_ess`,
//! `run.record_every` (default 10) and `run.threads` (default 0, meaning
//! automatic). Overrides use the qualified form `section.key=value`.
//!
//! ```text
//! [objective]
//! name = step-quadratic        # or: dataset = data.csv + n_batch = 32
//!
//! [smoother]
//! kind = exp
//! n_samples = 1024
//! target_ess = 512
//!
//! [schedule]
//! c_beta = 0.2
//! iota = 0.5
//! c_gamma = 0.2
//! kappa = 0.2
//!
//! [run]
//! theta0 = -1
//! n_iterations = 5000
//! seed = 42
//! record_every = 10
//! threads = 0
//!
//! [output]
//! dir = out
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mollify::{RunConfig, Schedule, SmootherKind};
use thiserror::Error;

pub const DEFAULT_RECORD_EVERY: u64 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key '{0}'")]
    Missing(String),
    #[error("unknown key '{0}'")]
    Unknown(String),
    #[error("key '{key}': {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSource {
    /// Built-in objective descriptor.
    Builtin(String),
    /// Mini-batch AUC objective over a CSV dataset.
    Dataset { path: PathBuf, n_batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSource,
    pub smoother: SmootherKind,
    pub n_samples: usize,
    pub target_ess: Option<f64>,
    pub c_beta: f64,
    pub iota: f64,
    pub c_gamma: f64,
    pub kappa: f64,
    pub theta0: Vec<f64>,
    pub n_iterations: u64,
    pub seed: u64,
    pub record_every: u64,
    pub threads: usize,
    pub output: PathBuf,
}

const KEYS: &[&str] = &[
    "objective.name",
    "objective.dataset",
    "objective.n_batch",
    "smoother.kind",
    "smoother.n_samples",
    "smoother.target_ess",
    "schedule.c_beta",
    "schedule.iota",
    "schedule.c_gamma",
    "schedule.kappa",
    "run.theta0",
    "run.n_iterations",
    "run.seed",
    "run.record_every",
    "run.threads",
    "output.dir",
];

/// Parse `section.key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        message: format!("override '{s}' is not of the form section.key=value"),
    })?;
    let key = k.trim().to_string();
    if !KEYS.contains(&key.as_str()) {
        return Err(ConfigError::Unknown(key));
    }
    Ok((key, v.trim().to_string()))
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut section = String::new();
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("malformed section header '{line}'"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected key = value, found '{line}'"),
        })?;
        if section.is_empty() {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: "key outside of any section".into(),
            });
        }
        let key = format!("{section}.{}", k.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Unknown(key));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(map)
}

fn take<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    match map.remove(key) {
        None => Ok(None),
        Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Invalid {
            key: key.into(),
            message: format!("cannot parse '{v}': {e}"),
        }),
    }
}

fn require<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    take(map, key)?.ok_or_else(|| ConfigError::Missing(key.into()))
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut map = parse_entries(text)?;
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }

        let name: Option<String> = take(&mut map, "objective.name")?;
        let dataset: Option<PathBuf> = take(&mut map, "objective.dataset")?;
        let n_batch: Option<usize> = take(&mut map, "objective.n_batch")?;
        let objective = match (name, dataset) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "objective",
                    "give either 'name' or 'dataset', not both",
                ))
            }
            (Some(name), None) => {
                if n_batch.is_some() {
                    return Err(invalid("objective.n_batch", "only valid with a dataset"));
                }
                ObjectiveSource::Builtin(name)
            }
            (None, Some(path)) => ObjectiveSource::Dataset {
                path,
                n_batch: n_batch.ok_or_else(|| ConfigError::Missing("objective.n_batch".into()))?,
            },
            (None, None) => return Err(ConfigError::Missing("objective.name".into())),
        };

        let smoother_kind: String = require(&mut map, "smoother.kind")?;
        let smoother = smoother_kind
            .parse::<SmootherKind>()
            .map_err(|e| invalid("smoother.kind", e.to_string()))?;
        let theta_text: String = require(&mut map, "run.theta0")?;
        let theta0 = theta_text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid("run.theta0", e.to_string()))?;

        let cfg = ExperimentConfig {
            objective,
            smoother,
            n_samples: require(&mut map, "smoother.n_samples")?,
            target_ess: take(&mut map, "smoother.target_ess")?,
            c_beta: require(&mut map, "schedule.c_beta")?,
            iota: require(&mut map, "schedule.iota")?,
            c_gamma: require(&mut map, "schedule.c_gamma")?,
            kappa: require(&mut map, "schedule.kappa")?,
            theta0,
            n_iterations: require(&mut map, "run.n_iterations")?,
            seed: require(&mut map, "run.seed")?,
            record_every: take(&mut map, "run.record_every")?.unwrap_or(DEFAULT_RECORD_EVERY),
            threads: take(&mut map, "run.threads")?.unwrap_or(0),
            output: require(&mut map, "output.dir")?,
        };
        debug_assert!(map.is_empty());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Syntax {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.run_config().map(|_| ())?;
        if self.theta0.is_empty() || self.theta0.iter().any(|t| !t.is_finite()) {
            return Err(invalid(
                "run.theta0",
                "must be a non-empty list of finite numbers",
            ));
        }
        if let ObjectiveSource::Dataset { n_batch: 0, .. } = self.objective {
            return Err(invalid("objective.n_batch", "must be >= 1"));
        }
        Ok(())
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let beta = Schedule::new(self.c_beta, self.iota)
            .map_err(|e| invalid("schedule.c_beta/iota", e.to_string()))?;
        let gamma = Schedule::new(self.c_gamma, self.kappa)
            .map_err(|e| invalid("schedule.c_gamma/kappa", e.to_string()))?;
        let cfg = RunConfig {
            beta,
            gamma,
            smoother: self.smoother,
            n_iterations: self.n_iterations,
            n_samples: self.n_samples,
            target_ess: self.target_ess,
            master_seed: self.seed,
            record_every: self.record_every,
        };
        cfg.validate().map_err(|e| invalid("run", e.to_string()))?;
        Ok(cfg)
    }

    /// Serialize back to the file format; `parse(to_config_string())` is lossless.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        s.push_str("[objective]\n");
        match &self.objective {
            ObjectiveSource::Builtin(name) => {
                let _ = writeln!(s, "name = {name}");
            }
            ObjectiveSource::Dataset { path, n_batch } => {
                let _ = writeln!(s, "dataset = {}", path.display());
                let _ = writeln!(s, "n_batch = {n_batch}");
            }
        }
        let _ = writeln!(s, "\n[smoother]\nkind = {}", self.smoother);
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        if let Some(t) = self.target_ess {
            let _ = writeln!(s, "target_ess = {t:?}");
        }
        let _ = writeln!(s, "\n[schedule]");
        let _ = writeln!(s, "c_beta = {:?}", self.c_beta);
        let _ = writeln!(s, "iota = {:?}", self.iota);
        let _ = writeln!(s, "c_gamma = {:?}", self.c_gamma);
        let _ = writeln!(s, "kappa = {:?}", self.kappa);
        let theta: Vec<String> = self.theta0.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "\n[run]\ntheta0 = {}", theta.join(", "));
        let _ = writeln!(s, "n_iterations = {}", self.n_iterations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "record_every = {}", self.record_every);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "\n[output]\ndir = {}", self.output.display());
        s
    }
}
