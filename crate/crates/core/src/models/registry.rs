use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::measles::{synthetic_network, MeaslesData, MeaslesNetwork, MeaslesParams, SyntheticSpec};
use super::{CorrelatedBm, CorrelatedBmConfig, Lorenz96, Lorenz96Config};
use crate::error::{Error, Result};
use crate::model::{Model, ObsSeries};

/// A model chosen by name, with its construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    CorrelatedBm(CorrelatedBmConfig),
    Lorenz96(Lorenz96Config),
    Measles(MeaslesSpec),
}

/// Measles network read from a directory of CSV files (`cities.csv`,
/// `births.csv`, `cases.csv`, optional `distances.csv`) or simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeaslesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub params: MeaslesParams,
    #[serde(default = "one_day")]
    pub euler_dt: f64,
}

fn one_day() -> f64 {
    1.0
}

/// Observations shipped with a model, with their times.
#[derive(Debug, Clone, PartialEq)]
pub struct BundledData {
    pub t0: f64,
    pub obs_times: Vec<f64>,
    pub observations: ObsSeries,
}

pub struct BuiltModel {
    pub model: Box<dyn Model>,
    pub data: Option<BundledData>,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::CorrelatedBm(_) => "correlated_bm",
            ModelSpec::Lorenz96(_) => "lorenz96",
            ModelSpec::Measles(_) => "measles",
        }
    }

    pub fn build(&self) -> Result<BuiltModel> {
        Ok(match self {
            ModelSpec::CorrelatedBm(c) => BuiltModel {
                model: Box::new(CorrelatedBm::new(c)?),
                data: None,
            },
            ModelSpec::Lorenz96(c) => BuiltModel {
                model: Box::new(Lorenz96::new(c)?),
                data: None,
            },
            ModelSpec::Measles(m) => {
                let data = match (&m.data_dir, &m.synthetic) {
                    (Some(dir), None) => {
                        let distances = dir.join("distances.csv");
                        MeaslesData::from_files(
                            &dir.join("cities.csv"),
                            &dir.join("births.csv"),
                            &dir.join("cases.csv"),
                            distances.exists().then_some(distances.as_path()),
                        )?
                    }
                    (None, Some(s)) => synthetic_network(s, m.euler_dt)?,
                    _ => {
                        return Err(Error::Config(
                            "measles model needs exactly one of `data_dir` and `synthetic`".into(),
                        ))
                    }
                };
                let model = MeaslesNetwork::new(&data, &m.params, m.euler_dt)?;
                BuiltModel {
                    model: Box::new(model),
                    data: Some(BundledData {
                        t0: data.t0,
                        obs_times: data.obs_times.clone(),
                        observations: data.cases.clone(),
                    }),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_from_json() {
        let spec: ModelSpec = serde_json::from_str(r#"{"name": "lorenz96", "params": {"d": 6, "F": 7.5}}"#).unwrap();
        let built = spec.build().unwrap();
        assert_eq!(built.model.dim_latent(), 6);
        assert_eq!(built.model.params().get("F"), Some(7.5));
        assert!(built.data.is_none());
    }

    #[test]
    fn unknown_model_and_fields_are_rejected() {
        assert!(serde_json::from_str::<ModelSpec>(r#"{"name": "nope", "params": {}}"#).is_err());
        assert!(
            serde_json::from_str::<ModelSpec>(r#"{"name": "correlated_bm", "params": {"d": 2, "dd": 1}}"#).is_err()
        );
    }

    #[test]
    fn synthetic_measles_bundles_data() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"name": "measles", "params": {"synthetic": {"cities": 2, "years": 1, "seed": 3}}}"#,
        )
        .unwrap();
        let built = spec.build().unwrap();
        let data = built.data.unwrap();
        assert_eq!(data.obs_times.len(), 26);
        assert_eq!(data.observations[0].len(), 2);
    }
}
