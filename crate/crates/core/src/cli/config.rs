use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoders::{load_zoo, EncoderConfig};
use crate::error::{Error, Result};
use crate::lagsim::{DifferenceOrder, PolicySpec, SystemSpec};
use crate::metrics::EvaluationConfig;

pub const ENV_PREFIX: &str = "REPMETER_";

/// A value given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

/// Everything a pipeline run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Source<SystemSpec>,
    pub policy: PolicySpec,
    pub rollouts: usize,
    /// States per rollout.
    pub steps: usize,
    pub zoo: Source<Vec<EncoderConfig>>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Difference order used to estimate `α` when `evaluation.alpha` is unset.
    /// Defaults to 2 for feedback policies and 1 for open-loop exploration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_difference_order: Option<DifferenceOrder>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A config with every file reference loaded and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub run: RunConfig,
    pub system: SystemSpec,
    pub zoo: Vec<EncoderConfig>,
}

impl ResolvedConfig {
    pub fn difference_order(&self) -> DifferenceOrder {
        self.run
            .alpha_difference_order
            .unwrap_or(if self.run.policy.feedback_gain.is_some() {
                DifferenceOrder::Second
            } else {
                DifferenceOrder::First
            })
    }

    pub fn out(&self) -> &Path {
        &self.run.out
    }
}

/// Apply `REPMETER_<SECTION>_<KEY>=value` overrides to a raw config. The
/// section is everything up to the first underscore; `RUN` addresses
/// top-level keys. Values are parsed as JSON, falling back to a string.
pub fn apply_env_overrides<I>(config: &mut Value, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<_> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = &name[ENV_PREFIX.len()..];
        let (section, key) = rest
            .split_once('_')
            .filter(|(s, k)| !s.is_empty() && !k.is_empty())
            .ok_or_else(|| Error::Config(format!("{name}: expected {ENV_PREFIX}<SECTION>_<KEY>")))?;
        let (section, key) = (section.to_ascii_lowercase(), key.to_ascii_lowercase());
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let root = config
            .as_object_mut()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let target = if section == "run" {
            root
        } else {
            root.entry(section.clone())
                .or_insert_with(|| Value::Object(Default::default()))
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("{name}: `{section}` is not an inline object")))?
        };
        target.insert(key, value);
    }
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

impl RunConfig {
    /// Parse a config document after applying environment overrides.
    pub fn from_value<I>(mut raw: Value, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        apply_env_overrides(&mut raw, vars)?;
        serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load `path`, applying overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let raw: Value = read_json(path, "config")?;
        let mut cfg = Self::from_value(raw, std::env::vars())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Make relative file references relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Source::File(p) = &mut self.system {
            *p = resolve(base, p);
        }
        if let Source::File(p) = &mut self.zoo {
            *p = resolve(base, p);
        }
        self.out = resolve(base, &self.out);
    }

    /// Load referenced files and check every field.
    pub fn resolve(self) -> Result<ResolvedConfig> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.rollouts == 0 {
            return Err(Error::Config("rollouts must be at least 1".into()));
        }
        if self.steps < 2 {
            return Err(Error::Config("steps must be at least 2".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let system = match &self.system {
            Source::Inline(s) => s.clone(),
            Source::File(p) => read_json(p, "system file")?,
        };
        system.validate()?;
        let policy = self.policy.build()?;
        if policy.input_dim() != system.input_dim() {
            return Err(Error::Config(format!(
                "policy.mean has {} entries but the system takes {} inputs",
                policy.input_dim(),
                system.input_dim()
            )));
        }
        let zoo = match &self.zoo {
            Source::Inline(z) => z.clone(),
            Source::File(p) => load_zoo(p)?,
        };
        crate::encoders::build_zoo(&zoo, system.state_dim())?;
        let ev = &self.evaluation;
        ev.mine
            .validate()
            .map_err(|e| Error::Config(format!("evaluation.mine: {e}")))?;
        ev.probe
            .validate()
            .map_err(|e| Error::Config(format!("evaluation.probe: {e}")))?;
        if ev.knn_k == 0 {
            return Err(Error::Config("evaluation.knn_k must be at least 1".into()));
        }
        if let Some(a) = ev.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config("evaluation.alpha must be positive".into()));
            }
        }
        Ok(ResolvedConfig { run: self, system, zoo })
    }
}
