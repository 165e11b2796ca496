//! Versioned TOML scenario format.
//!
//! ```toml
//! version = 1
//! horizon = 7.0
//! cruise_speed = 10.0
//!
//! [initial]
//! v0 = 10.0
//!
//! [[obstacles]]
//! t_enter = 1.0
//! t_exit = 7.0
//! s_at_enter = 25.0
//! speed = 7.0
//! length = 5.0
//! ```
//!
//! Everything except `version` and `initial.v0` has a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tcplan::scenario::{default_limits, GridSpec, Scenario, ScenarioError};
use tcplan::stgraph::{InitialState, ObstacleTrace, StGraphError};
use tcplan::Scenario64;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Defaults to the initial speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cruise_speed: Option<f64>,
    pub initial: InitialSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSection>,
}

fn default_horizon() -> f64 {
    7.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub s0: f64,
    pub v0: f64,
    #[serde(default)]
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub j_min: f64,
    pub j_max: f64,
    pub a_cm: f64,
    /// Path curvature: one value, or one per coarse time step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = default_limits::<f64>();
        Self {
            v_max: l.v_max,
            a_min: l.a_min,
            a_max: l.a_max,
            j_min: l.j_min,
            j_max: l.j_max,
            a_cm: l.a_cm,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dt1: f64,
    pub ds: f64,
    pub edge_samples: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::<f64>::default();
        Self {
            dt1: g.dt1,
            ds: g.ds,
            edge_samples: g.edge_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub t_enter: f64,
    pub t_exit: f64,
    pub s_at_enter: f64,
    pub speed: f64,
    pub length: f64,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario64) -> Self {
        let l = &s.limits;
        let kappa = match l.kappa.as_slice() {
            [] => None,
            [k] => Some(Kappa::Scalar(*k)),
            ks => Some(Kappa::List(ks.to_vec())),
        };
        Self {
            version: FORMAT_VERSION,
            horizon: s.horizon,
            cruise_speed: Some(s.cruise_speed),
            initial: InitialSection {
                s0: s.initial.s0,
                v0: s.initial.v0,
                a0: s.initial.a0,
            },
            limits: LimitsSection {
                v_max: l.v_max,
                a_min: l.a_min,
                a_max: l.a_max,
                j_min: l.j_min,
                j_max: l.j_max,
                a_cm: l.a_cm,
                kappa,
            },
            grid: GridSection {
                dt1: s.grid.dt1,
                ds: s.grid.ds,
                edge_samples: s.grid.edge_samples,
            },
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleSection {
                    t_enter: o.t_enter,
                    t_exit: o.t_exit,
                    s_at_enter: o.s_at_enter,
                    speed: o.speed,
                    length: o.block_length,
                })
                .collect(),
        }
    }

    /// Converts to a validated scenario.
    pub fn into_scenario(self) -> Result<Scenario64, ScenarioFileError> {
        if self.version != FORMAT_VERSION {
            return Err(schema(
                "version",
                format!(
                    "unsupported version {}, expected {FORMAT_VERSION}",
                    self.version
                ),
            ));
        }
        let kappa = match self.limits.kappa {
            None => Vec::new(),
            Some(Kappa::Scalar(k)) => vec![k],
            Some(Kappa::List(ks)) if ks.is_empty() => {
                return Err(schema("limits.kappa", "empty list".into()))
            }
            Some(Kappa::List(ks)) => ks,
        };
        let mut limits = default_limits();
        limits.v_max = self.limits.v_max;
        limits.a_min = self.limits.a_min;
        limits.a_max = self.limits.a_max;
        limits.j_min = self.limits.j_min;
        limits.j_max = self.limits.j_max;
        limits.a_cm = self.limits.a_cm;
        limits.kappa = kappa;
        let scenario = Scenario {
            horizon: self.horizon,
            initial: InitialState {
                s0: self.initial.s0,
                v0: self.initial.v0,
                a0: self.initial.a0,
            },
            cruise_speed: self.cruise_speed.unwrap_or(self.initial.v0),
            limits,
            obstacles: self
                .obstacles
                .iter()
                .map(|o| ObstacleTrace {
                    t_enter: o.t_enter,
                    t_exit: o.t_exit,
                    s_at_enter: o.s_at_enter,
                    speed: o.speed,
                    block_length: o.length,
                })
                .collect(),
            grid: GridSpec {
                dt1: self.grid.dt1,
                ds: self.grid.ds,
                edge_samples: self.grid.edge_samples,
            },
        };
        scenario.validate().map_err(describe)?;
        Ok(scenario)
    }
}

fn schema(path: &str, message: String) -> ScenarioFileError {
    ScenarioFileError::Schema {
        path: path.to_string(),
        message,
    }
}

fn describe(e: ScenarioError) -> ScenarioFileError {
    match e {
        ScenarioError::NonFinite { field } => schema(field, "must be finite".into()),
        ScenarioError::BadValue { field, reason } => schema(field, reason.into()),
        ScenarioError::Obstacle { index, source } => {
            let field = match source {
                StGraphError::BadWindow { t_enter, .. } if t_enter < 0.0 => "t_enter",
                StGraphError::BadWindow { .. } => "t_exit",
                StGraphError::BadBlockLength(_) => "length",
                _ => "",
            };
            let path = if field.is_empty() {
                format!("obstacles[{index}]")
            } else {
                format!("obstacles[{index}].{field}")
            };
            ScenarioFileError::Schema {
                path,
                message: source.to_string(),
            }
        }
        ScenarioError::StartBlocked { index } => schema(
            &format!("obstacles[{index}]"),
            "covers the initial station at t = 0".into(),
        ),
        ScenarioError::Grid(source) => schema("grid", source.to_string()),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario64, ScenarioFileError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioFileError::Syntax(e.to_string()))?;
    file.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario64, ScenarioFileError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn serialize_scenario(scenario: &Scenario64) -> String {
    toml::to_string(&ScenarioFile::from_scenario(scenario))
        .expect("scenario fields are plain numbers")
}
