use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::agent::AgentRegistry;
use crate::error::{Error, Result};
use crate::mdp::EnvSpec;
use crate::requirements::RequirementSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub id: String,
    #[serde(default)]
    pub params: Value,
}

/// One experiment: an environment, a requirement, and the algorithms to
/// compare over a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(deserialize_with = "env_descriptor")]
    pub environment: EnvSpec,
    /// A single algorithm object or a list of them.
    #[serde(alias = "algorithm", deserialize_with = "one_or_many")]
    pub algorithms: Vec<AlgorithmSpec>,
    pub requirement: RequirementSpec,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha_p")]
    pub alpha_p: f64,
    #[serde(default)]
    pub step_cap: Option<u64>,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub track_model_error: bool,
    #[serde(default)]
    pub eta_halving: bool,
}

fn default_delta() -> f64 {
    0.1
}

fn default_alpha_p() -> f64 {
    1.0
}

fn default_log_every() -> u64 {
    10
}

fn env_descriptor<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<EnvSpec, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => s.parse().map_err(serde::de::Error::custom),
        v => serde_json::from_value(v).map_err(serde::de::Error::custom),
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<AlgorithmSpec>, D::Error> {
    match Value::deserialize(d)? {
        Value::Array(items) => items
            .into_iter()
            .map(|v| serde_json::from_value(v).map_err(serde::de::Error::custom))
            .collect(),
        Value::String(id) => Ok(vec![AlgorithmSpec {
            id,
            params: Value::Null,
        }]),
        v => Ok(vec![serde_json::from_value(v).map_err(serde::de::Error::custom)?]),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad experiment config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Checks everything that can be checked without running: seeds,
    /// numeric settings, and that every algorithm id and parameter set
    /// resolves in `registry`.
    pub fn validate(&self, registry: &AgentRegistry) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithm given".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("{} not in (0,1)", self.delta)));
        }
        if !(self.alpha_p > 0.0) {
            return Err(Error::param("alpha_p", "must be positive"));
        }
        if self.log_every == 0 {
            return Err(Error::param("log_every", "must be at least 1"));
        }
        let mut ids: Vec<&str> = Vec::new();
        for spec in &self.algorithms {
            if !registry.contains(&spec.id) {
                let known: Vec<&str> = registry.names().collect();
                return Err(Error::Config(format!(
                    "unknown algorithm `{}` (known: {})",
                    spec.id,
                    known.join(", ")
                )));
            }
            if ids.contains(&spec.id.as_str()) {
                return Err(Error::Config(format!("algorithm `{}` listed twice", spec.id)));
            }
            ids.push(&spec.id);
            registry.create(&spec.id, &spec.params)?;
        }
        Ok(())
    }
}
