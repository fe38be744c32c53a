//! Macroscopic time series, volume histograms and oscillation metrics.

use serde::{Deserialize, Serialize};

use crate::engine::{total_burden, SystemState};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// Fraction of the window maximum a peak must rise above its surroundings.
pub const DEFAULT_PROMINENCE: f64 = 0.01;

/// One sampled row of macroscopic quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub t: T,
    /// Total metastatic burden.
    #[serde(rename = "M")]
    pub burden: T,
    /// Number of metastases.
    #[serde(rename = "N")]
    pub count: T,
    #[serde(rename = "I")]
    pub inhibitor: T,
    #[serde(rename = "Vp")]
    pub primary: T,
    pub born: T,
    pub exited: T,
    /// Volume of the largest live metastasis, absent when there are none.
    pub largest_volume: Option<T>,
}

/// Reads the macroscopic quantities off a state.
pub fn sample<T: Scalar>(s: &SystemState<T>) -> Observation<T> {
    Observation {
        t: s.t,
        burden: total_burden(s),
        count: s.total_count(),
        inhibitor: s.inhibitor,
        primary: s.primary.v,
        born: s.born,
        exited: s.exited,
        largest_volume: s.cohorts.iter().map(|c| c.state.v).reduce(T::max),
    }
}

/// Cohort weight binned by volume on a log-spaced partition of `[V0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHistogram<T> {
    pub bin_edges: Vec<T>,
    pub mass: Vec<T>,
    pub largest_volume: Option<T>,
}

impl<T: Scalar> VolumeHistogram<T> {
    pub fn total_mass(&self) -> T {
        self.mass.iter().fold(T::zero(), |a, &m| a + m)
    }

    /// Mass normalized to unit total; all zeros when empty.
    pub fn normalized(&self) -> Vec<T> {
        let total = self.total_mass();
        if total > T::zero() {
            self.mass.iter().map(|&m| m / total).collect()
        } else {
            vec![T::zero(); self.mass.len()]
        }
    }

    /// Total variation distance between the normalized distributions of two
    /// histograms on the same partition.
    pub fn total_variation(&self, other: &Self) -> T {
        let half = T::lit(0.5);
        self.normalized()
            .iter()
            .zip(other.normalized())
            .map(|(a, b)| (*a - b).abs())
            .sum::<T>()
            * half
    }
}

/// Bins every live cohort's full weight by its volume. The partition is
/// log-spaced over `[V0, 1]` (or `[V0, 10 V0]` when `V0 >= 1`); volumes
/// beyond the last edge land in the last bin.
pub fn histogram<T: Scalar>(
    s: &SystemState<T>,
    p: &ModelParams<T>,
    n_bins: usize,
) -> VolumeHistogram<T> {
    let n_bins = n_bins.max(1);
    let lo = p.v0;
    let hi = if lo < T::one() {
        T::one()
    } else {
        lo * T::lit(10.0)
    };
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let width = (log_hi - log_lo) / T::count(n_bins);
    let mut bin_edges: Vec<T> = (0..=n_bins)
        .map(|i| (log_lo + T::count(i) * width).exp())
        .collect();
    bin_edges[0] = lo;
    bin_edges[n_bins] = hi;

    let mut mass = vec![T::zero(); n_bins];
    for c in &s.cohorts {
        let pos = ((c.state.v.ln() - log_lo) / width).floor();
        let idx = pos.to_usize().unwrap_or(0).min(n_bins - 1);
        mass[idx] = mass[idx] + c.weight;
    }
    VolumeHistogram {
        bin_edges,
        mass,
        largest_volume: s.cohorts.iter().map(|c| c.state.v).reduce(T::max),
    }
}

/// Sampled macroscopic time series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    #[serde(rename = "M")]
    pub burden: Vec<T>,
    #[serde(rename = "N")]
    pub count: Vec<T>,
    #[serde(rename = "I")]
    pub inhibitor: Vec<T>,
    #[serde(rename = "Vp")]
    pub primary: Vec<T>,
    pub born: Vec<T>,
    pub exited: Vec<T>,
    pub largest_volume: Vec<Option<T>>,
    pub final_histogram: VolumeHistogram<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            burden: Vec::with_capacity(n),
            count: Vec::with_capacity(n),
            inhibitor: Vec::with_capacity(n),
            primary: Vec::with_capacity(n),
            born: Vec::with_capacity(n),
            exited: Vec::with_capacity(n),
            largest_volume: Vec::with_capacity(n),
            final_histogram: VolumeHistogram {
                bin_edges: Vec::new(),
                mass: Vec::new(),
                largest_volume: None,
            },
        }
    }

    pub fn push(&mut self, s: &SystemState<T>) {
        self.push_observation(sample(s));
    }

    pub fn push_observation(&mut self, o: Observation<T>) {
        self.times.push(o.t);
        self.burden.push(o.burden);
        self.count.push(o.count);
        self.inhibitor.push(o.inhibitor);
        self.primary.push(o.primary);
        self.born.push(o.born);
        self.exited.push(o.exited);
        self.largest_volume.push(o.largest_volume);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> Observation<T> {
        Observation {
            t: self.times[i],
            burden: self.burden[i],
            count: self.count[i],
            inhibitor: self.inhibitor[i],
            primary: self.primary[i],
            born: self.born[i],
            exited: self.exited[i],
            largest_volume: self.largest_volume[i],
        }
    }

    /// Index of the first sample at or after `t`.
    pub fn first_index_at(&self, t: T) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Largest live metastasis over samples at or after `t`.
    pub fn largest_volume_after(&self, t: T) -> Option<T> {
        self.largest_volume[self.first_index_at(t)..]
            .iter()
            .flatten()
            .copied()
            .reduce(T::max)
    }

    /// Worst `|born - exited - N|` over all samples.
    pub fn max_conservation_defect(&self) -> T {
        (0..self.len())
            .map(|i| (self.born[i] - self.exited[i] - self.count[i]).abs())
            .fold(T::zero(), T::max)
    }
}

/// Peak statistics of `M(t)` on the post-transient window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationMetrics<T> {
    pub peak_times: Vec<T>,
    pub peak_values: Vec<T>,
    /// Mean gap between consecutive peaks; absent with fewer than two.
    pub mean_period: Option<T>,
    /// Mean drop from each peak to the following trough; zero without peaks.
    pub amplitude: T,
    pub min_after_transient: T,
    /// Two or more peaks were found.
    pub oscillatory: bool,
}

/// Oscillation metrics of the burden series after time `transient`, with the
/// default prominence threshold.
pub fn oscillation_metrics<T: Scalar>(
    traj: &Trajectory<T>,
    transient: T,
) -> Result<OscillationMetrics<T>> {
    series_oscillation_metrics(
        &traj.times,
        &traj.burden,
        transient,
        T::lit(DEFAULT_PROMINENCE),
    )
}

/// Oscillation metrics of an arbitrary series `values(times)`.
///
/// Peaks are local maxima (flat tops reduced to their middle sample) whose
/// topographic prominence is at least `prominence` times the window maximum.
/// The trough after a peak is the minimum before the next peak, or before the
/// window end for the last one; the last peak only contributes when it is the
/// only peak.
pub fn series_oscillation_metrics<T: Scalar>(
    times: &[T],
    values: &[T],
    transient: T,
    prominence: T,
) -> Result<OscillationMetrics<T>> {
    if times.len() != values.len() {
        return Err(Error::Domain("times and values differ in length".into()));
    }
    let start = times.partition_point(|&t| t < transient);
    let (ts, ys) = (&times[start..], &values[start..]);
    if ys.len() < 3 {
        return Err(Error::Domain(format!(
            "{} samples after t = {transient}; need at least 3",
            ys.len()
        )));
    }
    let max = ys.iter().copied().fold(T::neg_infinity(), T::max);
    let min_after_transient = ys.iter().copied().fold(T::infinity(), T::min);
    let threshold = prominence * max.abs();

    let peaks: Vec<usize> = local_maxima(ys)
        .into_iter()
        .filter(|&i| peak_prominence(ys, i) > threshold)
        .collect();

    let peak_times: Vec<T> = peaks.iter().map(|&i| ts[i]).collect();
    let peak_values: Vec<T> = peaks.iter().map(|&i| ys[i]).collect();

    let mean_period = (peaks.len() >= 2)
        .then(|| (peak_times[peak_times.len() - 1] - peak_times[0]) / T::count(peaks.len() - 1));

    let drops: Vec<T> = match peaks.len() {
        0 => Vec::new(),
        1 => {
            let i = peaks[0];
            let trough = ys[i..].iter().copied().fold(T::infinity(), T::min);
            vec![ys[i] - trough]
        }
        _ => peaks
            .windows(2)
            .map(|w| {
                let trough = ys[w[0]..=w[1]].iter().copied().fold(T::infinity(), T::min);
                ys[w[0]] - trough
            })
            .collect(),
    };
    let amplitude = if drops.is_empty() {
        T::zero()
    } else {
        drops.iter().copied().sum::<T>() / T::count(drops.len())
    };

    Ok(OscillationMetrics {
        oscillatory: peaks.len() >= 2,
        peak_times,
        peak_values,
        mean_period,
        amplitude,
        min_after_transient,
    })
}

/// Interior local maxima; a plateau counts once, at its middle sample.
fn local_maxima<T: Scalar>(ys: &[T]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = ys.len();
    let mut i = 1;
    while i + 1 < n {
        if ys[i - 1] < ys[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && ys[ahead] == ys[i] {
                ahead += 1;
            }
            if ys[ahead] < ys[i] {
                peaks.push((i + ahead - 1) / 2);
            }
            i = ahead;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of the peak above the higher of the two lowest points reachable on
/// either side before meeting a strictly higher sample.
fn peak_prominence<T: Scalar>(ys: &[T], peak: usize) -> T {
    let h = ys[peak];
    let mut left_min = h;
    for &y in ys[..peak].iter().rev() {
        if y > h {
            break;
        }
        left_min = left_min.min(y);
    }
    let mut right_min = h;
    for &y in &ys[peak + 1..] {
        if y > h {
            break;
        }
        right_min = right_min.min(y);
    }
    h - left_min.max(right_min)
}
