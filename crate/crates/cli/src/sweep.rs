//! One-parameter sweeps executed on a bounded thread pool.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::{self, Outcome};
use crate::scenario::{Resolved, Scenario, PARAM_NAMES};

pub const SUMMARY_HEADER: [&str; 8] = [
    "axis_value",
    "lambda0",
    "mean_period",
    "amplitude",
    "min_after_transient",
    "max_M",
    "largest_volume",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Log { log_range: LogRange },
}

impl Values {
    pub fn expand(&self) -> Result<Vec<f64>> {
        match self {
            Values::List(v) => Ok(v.clone()),
            Values::Log { log_range: r } => {
                if !(r.start > 0.0 && r.stop > 0.0 && r.start.is_finite() && r.stop.is_finite()) {
                    return Err(CliError::Config(
                        "log_range bounds must be positive and finite".into(),
                    ));
                }
                if r.count == 0 {
                    return Err(CliError::Config("log_range.count must be >= 1".into()));
                }
                if r.count == 1 {
                    return Ok(vec![r.start]);
                }
                let (a, b) = (r.start.ln(), r.stop.ln());
                let n = (r.count - 1) as f64;
                Ok((0..r.count)
                    .map(|i| (a + (b - a) * i as f64 / n).exp())
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: String,
    pub values: Values,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub lambda0: Option<f64>,
    pub mean_period: Option<f64>,
    pub amplitude: Option<f64>,
    pub min_after_transient: Option<f64>,
    pub max_burden: Option<f64>,
    pub largest_volume: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_outcome(value: f64, o: &Outcome) -> Self {
        Self {
            axis_value: value,
            lambda0: o.metrics.lambda0,
            mean_period: o.metrics.mean_period,
            amplitude: Some(o.metrics.amplitude),
            min_after_transient: Some(o.metrics.min_after_transient),
            max_burden: Some(o.max_burden),
            largest_volume: o.metrics.largest_volume,
            error: None,
        }
    }

    fn failed(value: f64, err: &CliError) -> Self {
        Self {
            axis_value: value,
            lambda0: None,
            mean_period: None,
            amplitude: None,
            min_after_transient: None,
            max_burden: None,
            largest_volume: None,
            error: Some(err.to_string()),
        }
    }

    fn record(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.axis_value.to_string(),
            f(self.lambda0),
            f(self.mean_period),
            f(self.amplitude),
            f(self.min_after_transient),
            f(self.max_burden),
            f(self.largest_volume),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        crate::scenario::read_json(path)
    }

    /// Expands the axis into one resolved scenario per value, rejecting the
    /// whole sweep if any substitution is invalid.
    pub fn scenarios(&self) -> Result<Vec<(f64, Resolved)>> {
        if !PARAM_NAMES.contains(&self.axis.as_str()) {
            return Err(CliError::Config(format!(
                "unknown sweep axis `{}`; expected one of {PARAM_NAMES:?}",
                self.axis
            )));
        }
        let values = self.values.expand()?;
        if values.is_empty() {
            return Err(CliError::Config("sweep values must not be empty".into()));
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let mut sc = self.base.clone();
                sc.params.set(&self.axis, v)?;
                sc.name = format!("{}-{}-{v}", self.base.name, self.axis);
                let r = sc.resolve().map_err(|e| {
                    CliError::Config(format!("values[{i}] ({} = {v}): {e}", self.axis))
                })?;
                Ok((v, r))
            })
            .collect()
    }
}

/// Runs every value of the sweep, writing per-run artifacts to
/// `out/<index>_<axis>=<value>/` and the table to `out/summary.csv`.
/// Fails only if the spec is invalid, the summary cannot be written, or
/// every run failed (then with the first run's error).
pub fn run_sweep(spec: &SweepSpec, out: &Path, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let runs = spec.scenarios()?;
    let threads = jobs.unwrap_or(spec.parallelism);
    if threads == 0 {
        return Err(CliError::Config("parallelism must be >= 1".into()));
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;

    let results: Vec<(SweepRow, Option<CliError>)> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, (v, sc))| {
                let dir = run_dir(out, i, &spec.axis, *v);
                match run::run_scenario(sc, &dir) {
                    Ok(o) => (SweepRow::from_outcome(*v, &o), None),
                    Err(e) => {
                        eprintln!("run {i} ({} = {v}) failed: {e}", spec.axis);
                        (SweepRow::failed(*v, &e), Some(e))
                    }
                }
            })
            .collect()
    });

    let (rows, mut errors): (Vec<SweepRow>, Vec<Option<CliError>>) = results.into_iter().unzip();
    write_summary(&out.join("summary.csv"), &rows)?;
    if errors.iter().all(Option::is_some) {
        // every run failed: report the first failure with its own exit status
        return Err(errors.swap_remove(0).expect("checked above"));
    }
    Ok(rows)
}

fn run_dir(out: &Path, index: usize, axis: &str, value: f64) -> PathBuf {
    out.join(format!("{index:03}_{axis}={value}"))
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
