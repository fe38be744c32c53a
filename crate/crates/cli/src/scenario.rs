//! Scenario files: parameter overrides on the reference set, solver
//! settings, optional initial metastases and the requested outputs.

use std::fs;
use std::path::Path;

use metasim_core::{
    nondimensionalize, Cohort64, DimensionalParams64, ModelParams64, SolverSettings64,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Overrides applied on top of [`ModelParams64::base`]. When `V0` is
/// overridden and `Vm` is not, the threshold follows `V0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(rename = "K0", default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(rename = "Vm", default, skip_serializing_if = "Option::is_none")]
    pub vm: Option<f64>,
}

/// Names accepted by [`ParamOverrides::set`] and as sweep axes.
pub const PARAM_NAMES: [&str; 8] = ["b", "e", "k", "m", "alpha", "V0", "K0", "Vm"];

impl ParamOverrides {
    pub fn apply(&self, base: &ModelParams64) -> ModelParams64 {
        let v0 = self.v0.unwrap_or(base.v0);
        let vm = match (self.vm, self.v0) {
            (Some(vm), _) => vm,
            (None, Some(_)) if base.vm == base.v0 => v0,
            (None, _) => base.vm,
        };
        ModelParams64 {
            b: self.b.unwrap_or(base.b),
            e: self.e.unwrap_or(base.e),
            k: self.k.unwrap_or(base.k),
            m: self.m.unwrap_or(base.m),
            alpha: self.alpha.unwrap_or(base.alpha),
            v0,
            k0: self.k0.unwrap_or(base.k0),
            vm,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "b" => &mut self.b,
            "e" => &mut self.e,
            "k" => &mut self.k,
            "m" => &mut self.m,
            "alpha" => &mut self.alpha,
            "V0" => &mut self.v0,
            "K0" => &mut self.k0,
            "Vm" => &mut self.vm,
            other => {
                return Err(CliError::Config(format!(
                    "unknown parameter `{other}`; expected one of {PARAM_NAMES:?}"
                )))
            }
        };
        *slot = Some(value);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_floor: Option<f64>,
    /// Start of the analysis window; defaults to a quarter of `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub timeseries: bool,
    #[serde(default = "yes")]
    pub histogram: bool,
    #[serde(default = "yes")]
    pub metrics: bool,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default)]
    pub log_scale: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            timeseries: true,
            histogram: true,
            metrics: true,
            plots: true,
            log_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub params: ParamOverrides,
    /// Raw biophysical constants, rescaled before `params` is applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensional: Option<DimensionalParams64>,
    #[serde(default)]
    pub settings: SettingsSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_cohorts: Vec<Cohort64>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// A scenario with every default filled in and validated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub name: String,
    pub params: ModelParams64,
    pub settings: SolverSettings64,
    pub transient: f64,
    pub histogram_bins: usize,
    pub initial_cohorts: Vec<Cohort64>,
    pub outputs: OutputSpec,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: None,
            params: ParamOverrides::default(),
            dimensional: None,
            settings: SettingsSpec::default(),
            initial_cohorts: Vec::new(),
            outputs: OutputSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.name.is_empty() {
            return Err(CliError::Config("scenario name must not be empty".into()));
        }
        let start = match &self.dimensional {
            Some(d) => nondimensionalize(d)?,
            None => ModelParams64::base(),
        };
        let params = self.params.apply(&start);
        params.validate()?;

        let defaults = SolverSettings64::default();
        let s = &self.settings;
        let settings = SolverSettings64 {
            dt: s.dt.unwrap_or(defaults.dt),
            t_end: s.t_end.unwrap_or(defaults.t_end),
            sample_every: s.sample_every.unwrap_or(defaults.sample_every),
            weight_floor: s.weight_floor.unwrap_or(defaults.weight_floor),
        };
        settings.validate()?;
        let transient = s.transient.unwrap_or(0.25 * settings.t_end);
        if !(transient.is_finite() && transient >= 0.0 && transient < settings.t_end) {
            return Err(CliError::Config(format!(
                "transient must lie in [0, t_end), got {transient}"
            )));
        }
        let histogram_bins = s
            .histogram_bins
            .unwrap_or(metasim_core::observables::DEFAULT_HISTOGRAM_BINS);
        if histogram_bins == 0 {
            return Err(CliError::Config("histogram_bins must be >= 1".into()));
        }
        Ok(Resolved {
            name: self.name.clone(),
            params,
            settings,
            transient,
            histogram_bins,
            initial_cohorts: self.initial_cohorts.clone(),
            outputs: self.outputs,
        })
    }
}

/// Parses a JSON file, reporting the path of the offending field on error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("at `{path}`: {}", e.into_inner())
    })
}
