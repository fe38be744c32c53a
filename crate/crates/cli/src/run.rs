//! Running one scenario and writing its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use metasim_core::{
    malthus_exponent, oscillation_metrics, Error as CoreError, Simulation64, Simulator,
    SpectralResult64, Trajectory64, VolumeHistogram64,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::scenario::Resolved;
use crate::svg;

pub const TIMESERIES_HEADER: [&str; 7] = ["t", "M", "N", "I", "Vp", "born_cum", "exited_cum"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "mass"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub peaks: Vec<Peak>,
    pub mean_period: Option<f64>,
    pub amplitude: f64,
    pub min_after_transient: f64,
    /// Largest live metastasis over the post-transient samples.
    pub largest_volume: Option<f64>,
    /// Only present for runs without systemic inhibition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub scenario: Resolved,
    pub simulation: Simulation64,
    pub metrics: Metrics,
    pub spectral: Option<SpectralResult64>,
    /// Largest `M` over the post-transient samples.
    pub max_burden: f64,
}

/// Simulates a resolved scenario and computes its metrics.
pub fn execute(sc: &Resolved) -> Result<Outcome> {
    let simulation = Simulator::new(sc.params, sc.settings)
        .initial_cohorts(sc.initial_cohorts.clone())
        .histogram_bins(sc.histogram_bins)
        .run()?;
    let traj = &simulation.trajectory;
    let osc = oscillation_metrics(traj, sc.transient).map_err(|e| {
        CliError::Config(format!(
            "cannot analyse window after t = {}: {e}",
            sc.transient
        ))
    })?;
    let spectral = if sc.params.e == 0.0 {
        match malthus_exponent(&sc.params) {
            Ok(r) => Some(r),
            Err(CoreError::NoRoot(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let start = traj.first_index_at(sc.transient);
    let max_burden = traj.burden[start..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let metrics = Metrics {
        peaks: osc
            .peak_times
            .iter()
            .zip(&osc.peak_values)
            .map(|(&t, &m)| Peak { t, m })
            .collect(),
        mean_period: osc.mean_period,
        amplitude: osc.amplitude,
        min_after_transient: osc.min_after_transient,
        largest_volume: traj.largest_volume_after(sc.transient),
        lambda0: spectral.map(|r| r.lambda0),
    };
    Ok(Outcome {
        scenario: sc.clone(),
        simulation,
        metrics,
        spectral,
        max_burden,
    })
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    scenario: &'a Resolved,
    note: &'static str,
    samples: usize,
    cohorts_alive: usize,
    max_conservation_defect: f64,
    spectral: Option<SpectralResult64>,
}

/// Runs a scenario and writes every requested artifact to `out`. On blow-up
/// an `error.json` diagnostic is written before the error is returned.
pub fn run_scenario(sc: &Resolved, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let outcome = match execute(sc) {
        Ok(o) => o,
        Err(err) => {
            if let CliError::Blowup { time, message } = &err {
                let diag = serde_json::json!({
                    "scenario": sc.name,
                    "error": "blowup",
                    "time": time,
                    "message": message,
                    "params": sc.params,
                    "settings": sc.settings,
                });
                write_json(&out.join("error.json"), &diag)?;
            }
            return Err(err);
        }
    };
    write_artifacts(&outcome, out)?;
    Ok(outcome)
}

pub fn write_artifacts(o: &Outcome, out: &Path) -> Result<()> {
    let sc = &o.scenario;
    let traj = &o.simulation.trajectory;
    if sc.outputs.timeseries {
        write_timeseries(&out.join("timeseries.csv"), traj)?;
    }
    if sc.outputs.histogram {
        write_histogram(&out.join("histogram.csv"), &traj.final_histogram)?;
    }
    if sc.outputs.metrics {
        write_json(&out.join("metrics.json"), &o.metrics)?;
    }
    let meta = RunMetadata {
        scenario: sc,
        note: "dt, t_end, sample_every and transient defaults are choices of this tool",
        samples: traj.len(),
        cohorts_alive: o.simulation.final_state.cohorts.len(),
        max_conservation_defect: traj.max_conservation_defect(),
        spectral: o.spectral,
    };
    write_json(&out.join("run.json"), &meta)?;
    if sc.outputs.plots {
        // plots are best effort; a failure here never changes the exit status
        if let Err(e) = write_plots(&out.join("plots"), traj, sc.outputs.log_scale) {
            eprintln!("warning: plots not written: {e}");
        }
    }
    Ok(())
}

pub fn write_timeseries(path: &Path, traj: &Trajectory64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TIMESERIES_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for i in 0..traj.len() {
        let row = [
            traj.times[i],
            traj.burden[i],
            traj.count[i],
            traj.inhibitor[i],
            traj.primary[i],
            traj.born[i],
            traj.exited[i],
        ];
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_histogram(path: &Path, h: &VolumeHistogram64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(HISTOGRAM_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (i, m) in h.mass.iter().enumerate() {
        w.write_record([
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            m.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_plots(dir: &Path, traj: &Trajectory64, log_y: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let series: [(&str, &str, &[f64]); 4] = [
        ("M", "metastatic burden M", &traj.burden),
        ("N", "number of metastases N", &traj.count),
        ("I", "inhibitor I", &traj.inhibitor),
        ("Vp", "primary volume Vp", &traj.primary),
    ];
    for (file, title, ys) in series {
        if let Some(svg) = svg::line_chart(title, "t", &traj.times, ys, log_y) {
            let path = dir.join(format!("{file}.svg"));
            fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Io {
        path: PathBuf::from(path),
        source,
    }
}
