use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use girf::guide::GuideSpec;
use girf::igirf::IgirfConfig;
use girf::mcap::PhiTransform;
use girf::models::ModelSpec;
use girf::ResampleScheme;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Filter,
    Compare,
    Igirf,
    Profile,
    Mcap,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Filter => "filter",
            Task::Compare => "compare",
            Task::Igirf => "igirf",
            Task::Profile => "profile",
            Task::Mcap => "mcap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Overrides of the model's default parameter values, by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theta: BTreeMap<String, f64>,
    /// Starting values for iterated filtering, applied on top of `theta`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub start: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// Observation CSV (`time,y1,...`); simulated from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub igirf: Option<IgirfConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcap: Option<McapConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

/// Observation schedule: explicit times, or `n_obs` times spaced `spacing`
/// apart after `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_obs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Intermediate steps per observation interval.
    #[serde(default = "one", rename = "S")]
    pub steps: usize,
}

impl GridConfig {
    pub fn obs_times(&self) -> Result<Vec<f64>, CliError> {
        match (&self.obs_times, self.n_obs, self.spacing) {
            (Some(t), None, None) => Ok(t.clone()),
            (None, Some(n), Some(dt)) => Ok((1..=n).map(|k| self.t0 + k as f64 * dt).collect()),
            _ => Err(CliError::Config(
                "grid: give either `obs_times` or both `n_obs` and `spacing`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Girf,
    Bootstrap,
    Apf,
    Enkf,
    Kalman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub engine: Engine,
    /// Particles per island, or ensemble members for the EnKF.
    #[serde(rename = "J", default)]
    pub particles: usize,
    #[serde(default = "one")]
    pub islands: usize,
    #[serde(default)]
    pub scheme: ResampleScheme,
    /// Required for the `girf` engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide: Option<GuideSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub engines: Vec<FilterConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Maximize over the other parameters with the `igirf` block before
    /// filtering; otherwise evaluate a slice at the model's values.
    #[serde(default)]
    pub maximize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McapConfig {
    /// Profile CSV; defaults to `profile.csv` in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "span")]
    pub span: f64,
    #[serde(default)]
    pub transform: PhiTransform,
    /// Row indices of profile points left out of the fit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<usize>,
}

fn alpha() -> f64 {
    0.05
}

fn span() -> f64 {
    girf::mcap::DEFAULT_SPAN
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        if config.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that the blocks `task` needs are present.
    pub fn require(&self, task: Task) -> Result<(), CliError> {
        let missing = |block: &str| {
            Err(CliError::Config(format!(
                "task `{}` needs a `{block}` block",
                task.as_str()
            )))
        };
        if task != Task::Mcap && self.model.is_none() {
            return missing("model");
        }
        match task {
            Task::Filter if self.filter.is_none() => missing("filter"),
            Task::Compare => match &self.compare {
                None => missing("compare"),
                Some(c) if c.engines.len() < 2 => {
                    Err(CliError::Config("compare.engines needs at least two engines".into()))
                }
                Some(_) => Ok(()),
            },
            Task::Igirf if self.igirf.is_none() => missing("igirf"),
            Task::Profile => match &self.profile {
                None => missing("profile"),
                Some(p) if p.maximize && self.igirf.is_none() => missing("igirf"),
                Some(_) if self.filter.is_none() => missing("filter"),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_report_their_path() {
        let err = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "model": {"name": "correlated_bm", "params": {"d": 2}},
                "filter": {"engine": "girf", "J": 10, "particles": 3}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("filter"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 1}"#).is_ok());
    }

    #[test]
    fn grid_needs_one_schedule() {
        let g = GridConfig {
            t0: 0.0,
            obs_times: None,
            n_obs: Some(3),
            spacing: Some(0.5),
            steps: 2,
        };
        assert_eq!(g.obs_times().unwrap(), vec![0.5, 1.0, 1.5]);
        let bad = GridConfig {
            obs_times: Some(vec![1.0]),
            ..g
        };
        assert!(bad.obs_times().is_err());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") && !path.ends_with("schema.json") {
                let config = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                config
                    .require(config.task.expect("shipped configs name a task"))
                    .unwrap();
                seen += 1;
            }
        }
        assert!(seen >= 5);
    }
}
