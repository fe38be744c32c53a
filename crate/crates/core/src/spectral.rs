//! Malthus exponent of the linear (`e = 0`) model.
//!
//! Without systemic inhibition the growth field no longer depends on the
//! population and every newborn follows the same characteristic
//! `X_tau(V0, K0)`. The population then grows like `exp(lambda0 t)` where
//! `lambda0` solves
//!
//! ```text
//! F(lambda) = int_0^inf beta(X_tau) exp(-lambda tau) dtau - 1 = 0.
//! ```
//!
//! The integral is truncated at `tau_max`; beyond it the flow sits at the
//! attracting equilibrium `(1, 1)` and the tail is added in closed form.

use serde::{Deserialize, Serialize};

use crate::engine::rk4_single;
use crate::error::{Error, Result};
use crate::model::{birth_state, emission_rate, field_unchecked, ModelParams, TumorState};
use crate::scalar::Scalar;

/// Numerical settings for [`malthus_exponent_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions<T> {
    pub tau_max: T,
    /// Step of the cached characteristic grid.
    pub flow_step: T,
    /// Root tolerance on `|F|`.
    pub tolerance: T,
    /// Finest quadrature level: at most `2^max_level` intervals per piece.
    pub max_level: u32,
}

impl<T: Scalar> Default for SpectralOptions<T> {
    fn default() -> Self {
        Self {
            tau_max: T::lit(50.0),
            flow_step: T::lit(5e-3),
            tolerance: T::lit(1e-10),
            max_level: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult<T> {
    pub lambda0: T,
    pub tau_max: T,
    pub quadrature_nodes: usize,
    /// `|F(lambda0)|`.
    pub residual: T,
}

/// The characteristic through the birth state under the uninhibited field,
/// tabulated on a uniform grid and interpolated with cubic Hermite splines.
#[derive(Debug, Clone)]
pub struct CharacteristicFlow<T> {
    step: T,
    states: Vec<TumorState<T>>,
    slopes: Vec<(T, T)>,
}

impl<T: Scalar> CharacteristicFlow<T> {
    /// Tabulates the flow on `[0, tau_max]` with RK4 steps of length `step`.
    pub fn new(p: &ModelParams<T>, tau_max: T, step: T) -> Result<Self> {
        if !(step > T::zero() && tau_max >= T::zero()) {
            return Err(Error::Settings(
                "flow step must be > 0 and tau_max >= 0".into(),
            ));
        }
        let n = (tau_max / step)
            .ceil()
            .to_usize()
            .ok_or_else(|| Error::Settings("flow grid too large".into()))?
            .max(1);
        let step = tau_max / T::count(n);
        let mut states = Vec::with_capacity(n + 1);
        let mut s = birth_state(p);
        states.push(s);
        for _ in 0..n {
            s = rk4_single(s, T::zero(), p, step);
            if !s.is_finite() {
                return Err(Error::Blowup {
                    time: (T::count(states.len()) * step).as_f64(),
                });
            }
            states.push(s);
        }
        let slopes = states
            .iter()
            .map(|s| field_unchecked(s.v, s.k, T::zero(), p))
            .collect();
        Ok(Self {
            step,
            states,
            slopes,
        })
    }

    pub fn tau_max(&self) -> T {
        self.step * T::count(self.states.len() - 1)
    }

    pub fn nodes(&self) -> &[TumorState<T>] {
        &self.states
    }

    pub fn step(&self) -> T {
        self.step
    }

    /// State at time `tau`; clamped to the last node past `tau_max`.
    pub fn at(&self, tau: T) -> TumorState<T> {
        if tau <= T::zero() {
            return self.states[0];
        }
        let last = self.states.len() - 1;
        let x = tau / self.step;
        let j = x.floor().to_usize().unwrap_or(last);
        if j >= last {
            return self.states[last];
        }
        let u = x - T::count(j);
        let h = self.step;
        let (a, b) = (self.states[j], self.states[j + 1]);
        let (da, db) = (self.slopes[j], self.slopes[j + 1]);
        TumorState::new(
            hermite(a.v, b.v, da.0 * h, db.0 * h, u),
            hermite(a.k, b.k, da.1 * h, db.1 * h, u),
        )
    }
}

fn hermite<T: Scalar>(y0: T, y1: T, m0: T, m1: T, u: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = two * u3 - three * u2 + T::one();
    let h10 = u3 - two * u2 + u;
    let h01 = three * u2 - two * u3;
    let h11 = u3 - u2;
    h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
}

/// State reached from the birth state after time `tau` with no inhibitor.
pub fn characteristic_flow<T: Scalar>(tau: T, p: &ModelParams<T>) -> Result<TumorState<T>> {
    let opts = SpectralOptions::<T>::default();
    let horizon = if tau > opts.tau_max {
        tau
    } else {
        opts.tau_max
    };
    Ok(CharacteristicFlow::new(p, horizon, opts.flow_step)?.at(tau))
}

/// Emission along the flow, pre-sampled on the finest grid of each piece
/// between threshold crossings.
struct EmissionProfile<T> {
    pieces: Vec<Piece<T>>,
    tail_rate: T,
    tau_max: T,
    max_level: u32,
}

struct Piece<T> {
    start: T,
    width: T,
    samples: Vec<T>,
}

impl<T: Scalar> EmissionProfile<T> {
    fn new(flow: &CharacteristicFlow<T>, p: &ModelParams<T>, max_level: u32) -> Self {
        let tau_max = flow.tau_max();
        let mut breaks = vec![T::zero()];
        breaks.extend(threshold_crossings(flow, p.vm));
        breaks.push(tau_max);

        let n = 1usize << max_level;
        let pieces = breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (start, end) = (w[0], w[1]);
                let width = end - start;
                // the emission indicator is constant on the open piece
                let mid = flow.at(start + width / T::lit(2.0));
                let emitting = mid.v >= p.vm;
                let samples = (0..=n)
                    .map(|i| {
                        if !emitting {
                            return T::zero();
                        }
                        let tau = start + width * T::count(i) / T::count(n);
                        p.m * flow.at(tau).v.powf(p.alpha)
                    })
                    .collect();
                Piece {
                    start,
                    width,
                    samples,
                }
            })
            .collect();
        Self {
            pieces,
            tail_rate: emission_rate(T::one(), p),
            tau_max,
            max_level,
        }
    }

    fn node_count(&self) -> usize {
        self.pieces.iter().map(|p| p.samples.len()).sum()
    }

    /// `F(lambda)`.
    fn residual(&self, lambda: T) -> T {
        let body: T = self
            .pieces
            .iter()
            .map(|piece| romberg(piece, lambda, self.max_level))
            .sum();
        let tail = self.tail_rate / lambda * (-lambda * self.tau_max).exp();
        body + tail - T::one()
    }
}

/// Times where `V(tau)` crosses `vm`, located by bisection on the interpolant.
fn threshold_crossings<T: Scalar>(flow: &CharacteristicFlow<T>, vm: T) -> Vec<T> {
    let nodes = flow.nodes();
    let h = flow.step();
    let mut out = Vec::new();
    for j in 0..nodes.len() - 1 {
        let (a, b) = (nodes[j].v >= vm, nodes[j + 1].v >= vm);
        if a == b {
            continue;
        }
        let (mut lo, mut hi) = (T::count(j) * h, T::count(j + 1) * h);
        for _ in 0..80 {
            let mid = (lo + hi) / T::lit(2.0);
            if (flow.at(mid).v >= vm) == a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(hi);
    }
    out
}

/// Romberg extrapolation of trapezoid sums, refined until successive
/// diagonal entries agree.
fn romberg<T: Scalar>(piece: &Piece<T>, lambda: T, max_level: u32) -> T {
    let n = 1usize << max_level;
    let f = |i: usize| {
        let tau = piece.start + piece.width * T::count(i) / T::count(n);
        piece.samples[i] * (-lambda * tau).exp()
    };
    let half = T::lit(0.5);
    let mut prev_row: Vec<T> = vec![half * piece.width * (f(0) + f(n))];
    let mut sum_interior = T::zero();
    for level in 1..=max_level {
        let stride = n >> level;
        let mut added = T::zero();
        let mut i = stride;
        while i < n {
            added = added + f(i);
            i += 2 * stride;
        }
        sum_interior = sum_interior + added;
        let h = piece.width / T::count(1usize << level);
        let trapezoid = h * (half * (f(0) + f(n)) + sum_interior);
        let mut row = Vec::with_capacity(prev_row.len() + 1);
        row.push(trapezoid);
        let mut factor = T::one();
        for (jdx, &prev) in prev_row.iter().enumerate() {
            factor = factor * T::lit(4.0);
            let r = row[jdx] + (row[jdx] - prev) / (factor - T::one());
            row.push(r);
        }
        let best = row[row.len() - 1];
        let before = prev_row[prev_row.len() - 1];
        let scale = best.abs().max(T::min_positive_value());
        if level >= 4 && (best - before).abs() <= T::lit(1e-14) * scale {
            return best;
        }
        prev_row = row;
    }
    prev_row[prev_row.len() - 1]
}

/// Malthus exponent with default numerical settings.
pub fn malthus_exponent<T: Scalar>(p: &ModelParams<T>) -> Result<SpectralResult<T>> {
    malthus_exponent_with(p, &SpectralOptions::default())
}

/// Solves the spectral equation by bracketing and bisection.
///
/// `F` is strictly decreasing in `lambda`, so the bracket is grown
/// geometrically from `[1, 1]` until it straddles the root.
pub fn malthus_exponent_with<T: Scalar>(
    p: &ModelParams<T>,
    opts: &SpectralOptions<T>,
) -> Result<SpectralResult<T>> {
    p.validate()?;
    if p.e != T::zero() {
        return Err(Error::Misuse(format!(
            "the Malthus exponent is defined for the linear model only (e = 0), got e = {}",
            p.e
        )));
    }
    if p.m == T::zero() {
        return Err(Error::NoRoot("m = 0, so F(lambda) = -1 everywhere".into()));
    }
    let flow = CharacteristicFlow::new(p, opts.tau_max, opts.flow_step)?;
    let profile = EmissionProfile::new(&flow, p, opts.max_level);
    let f = |lambda: T| profile.residual(lambda);

    let floor = T::lit(1e-12);
    let ceiling = T::lit(1e12);
    let mut lo = T::one();
    while f(lo) <= T::zero() {
        lo = lo / T::lit(2.0);
        if lo < floor {
            return Err(Error::NoRoot(
                "emission along the characteristic is too weak for positive growth".into(),
            ));
        }
    }
    let mut hi = lo * T::lit(2.0);
    while f(hi) >= T::zero() {
        lo = hi;
        hi = hi * T::lit(2.0);
        if hi > ceiling {
            return Err(Error::NoRoot("bracket expansion diverged".into()));
        }
    }

    let mut mid = (lo + hi) / T::lit(2.0);
    let mut value = f(mid);
    for _ in 0..200 {
        if value == T::zero() {
            break;
        }
        if value > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        let next = (lo + hi) / T::lit(2.0);
        if next == lo || next == hi {
            break;
        }
        mid = next;
        value = f(mid);
        if value.abs() < opts.tolerance && hi - lo <= T::lit(1e-13) * mid {
            break;
        }
    }
    let residual = value.abs();
    if residual.is_nan() || residual >= opts.tolerance {
        return Err(Error::NoRoot(format!(
            "bisection stalled with |F| = {residual}"
        )));
    }
    Ok(SpectralResult {
        lambda0: mid,
        tau_max: flow.tau_max(),
        quadrature_nodes: profile.node_count(),
        residual,
    })
}

/// Least-squares slope of `ln values` against `times` over `[t_lo, t_hi]`.
pub fn fit_growth_rate<T: Scalar>(times: &[T], values: &[T], window: (T, T)) -> Result<T> {
    if times.len() != values.len() {
        return Err(Error::Domain("times and values differ in length".into()));
    }
    let (lo, hi) = window;
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= lo && t <= hi)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Domain(format!(
            "{} samples in [{lo}, {hi}]; need at least 10",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| v.is_nan() || *v <= T::zero()) {
        return Err(Error::Domain(format!("nonpositive value {v} at t = {t}")));
    }
    let n = T::count(pts.len());
    let t_mean = pts.iter().map(|p| p.0).sum::<T>() / n;
    let y_mean = pts.iter().map(|p| p.1.ln()).sum::<T>() / n;
    let (sxy, sxx) = pts
        .iter()
        .fold((T::zero(), T::zero()), |(sxy, sxx), &(t, v)| {
            let dt = t - t_mean;
            (sxy + dt * (v.ln() - y_mean), sxx + dt * dt)
        });
    Ok(sxy / sxx)
}
