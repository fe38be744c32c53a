//! Lagrangian cohort engine for the structured metastatic population.
//!
//! Every newborn metastasis enters at the same point `(V0, K0)`, so the
//! density is exactly a weighted sum of point masses riding the
//! characteristics of the growth field. Each [`Cohort`] is one such point
//! mass. The primary tumor, the circulating inhibitor and every cohort are
//! advanced together by one classical RK4 step of the coupled system;
//! births and exits are then booked at the step boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{birth_state, emission_rate, field_unchecked, ModelParams, TumorState};
use crate::observables::{histogram, Trajectory, DEFAULT_HISTOGRAM_BINS};
use crate::scalar::Scalar;

/// Steps beyond this count are rejected rather than attempted.
pub const MAX_STEPS: usize = 1 << 31;

/// One characteristic curve carrying `weight` metastases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cohort<T> {
    pub birth_time: T,
    pub weight: T,
    pub state: TumorState<T>,
}

/// Full state of the coupled system at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState<T> {
    pub t: T,
    pub primary: TumorState<T>,
    pub inhibitor: T,
    /// Live cohorts, oldest first.
    pub cohorts: Vec<Cohort<T>>,
    /// Cumulative weight removed through the `V = V0` boundary or pruned.
    pub exited: T,
    /// Cumulative weight spawned, including any initial cohorts.
    pub born: T,
}

impl<T: Scalar> SystemState<T> {
    /// Primary tumor at the birth state, no inhibitor, no metastases.
    pub fn initial(p: &ModelParams<T>) -> Self {
        Self {
            t: T::zero(),
            primary: birth_state(p),
            inhibitor: T::zero(),
            cohorts: Vec::new(),
            exited: T::zero(),
            born: T::zero(),
        }
    }

    /// Initial state seeded with metastases already present. Their weight is
    /// booked as born so the conservation identity holds from `t = 0`.
    pub fn with_cohorts(p: &ModelParams<T>, mut cohorts: Vec<Cohort<T>>) -> Result<Self> {
        for c in &cohorts {
            if !(c.weight.is_finite() && c.weight >= T::zero()) {
                return Err(Error::InvalidState(format!(
                    "cohort weight must be finite and >= 0, got {}",
                    c.weight
                )));
            }
            if !(c.state.is_finite() && c.state.v >= p.v0 && c.state.k > T::zero()) {
                return Err(Error::InvalidState(format!(
                    "cohort state ({}, {}) outside the domain V >= V0, K > 0",
                    c.state.v, c.state.k
                )));
            }
        }
        cohorts.sort_by(|a, b| a.birth_time.partial_cmp(&b.birth_time).unwrap());
        let born = cohorts.iter().fold(T::zero(), |a, c| a + c.weight);
        Ok(Self {
            cohorts,
            born,
            ..Self::initial(p)
        })
    }

    /// Number of live metastases, `N(t)`.
    pub fn total_count(&self) -> T {
        self.cohorts.iter().fold(T::zero(), |a, c| a + c.weight)
    }

    /// `born - exited - N`, zero up to rounding.
    pub fn conservation_defect(&self) -> T {
        self.born - self.exited - self.total_count()
    }
}

/// Fixed-step solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    pub dt: T,
    pub t_end: T,
    pub sample_every: T,
    /// Cohorts lighter than this are dropped and booked as exited.
    #[serde(default)]
    pub weight_floor: T,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-2),
            t_end: T::lit(200.0),
            sample_every: T::lit(0.1),
            weight_floor: T::zero(),
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.dt) && self.dt > T::zero()) {
            return Err(Error::Settings("dt must be finite and > 0".into()));
        }
        if !(ok(self.t_end) && self.t_end > T::zero()) {
            return Err(Error::Settings("t_end must be finite and > 0".into()));
        }
        if !(ok(self.sample_every) && self.sample_every >= self.dt) {
            return Err(Error::Settings("sample_every must be >= dt".into()));
        }
        if !(ok(self.weight_floor) && self.weight_floor >= T::zero()) {
            return Err(Error::Settings("weight_floor must be >= 0".into()));
        }
        self.step_count().map(|_| ())
    }

    /// Number of steps needed to reach `t_end`.
    pub fn step_count(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        match n.to_usize() {
            Some(n) if n <= MAX_STEPS => Ok(n.max(1)),
            _ => Err(Error::Settings(format!(
                "t_end / dt = {} exceeds the step limit {MAX_STEPS}",
                (self.t_end / self.dt).as_f64()
            ))),
        }
    }

    /// Steps between two recorded samples.
    pub fn sample_stride(&self) -> usize {
        (self.sample_every / self.dt)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1)
    }
}

/// Total metastatic burden `M(t)`: summed volume of live cohorts.
pub fn total_burden<T: Scalar>(s: &SystemState<T>) -> T {
    s.cohorts
        .iter()
        .fold(T::zero(), |a, c| a + c.weight * c.state.v)
}

/// Right-hand side of the inhibitor balance `dI/dt = V_p + M - k I`.
pub fn inhibitor_rate<T: Scalar>(s: &SystemState<T>, p: &ModelParams<T>) -> T {
    s.primary.v + total_burden(s) - p.k * s.inhibitor
}

/// Influx of newborn metastases: emission of the primary plus emission of
/// every live cohort.
pub fn birth_rate<T: Scalar>(s: &SystemState<T>, p: &ModelParams<T>) -> T {
    emission_rate(s.primary.v, p) + cohort_emission(&s.cohorts, p)
}

fn cohort_emission<T: Scalar>(cohorts: &[Cohort<T>], p: &ModelParams<T>) -> T {
    cohorts
        .iter()
        .fold(T::zero(), |a, c| a + c.weight * emission_rate(c.state.v, p))
}

/// Advances `s` by one step of length `dt` and returns the new state.
pub fn step<T: Scalar>(s: &SystemState<T>, p: &ModelParams<T>, dt: T) -> Result<SystemState<T>> {
    let mut next = s.clone();
    Stepper::new().step(&mut next, p, dt, T::zero())?;
    Ok(next)
}

/// Reusable RK4 workspace.
///
/// The packed state is `[V_p, K_p, I, V_1, K_1, V_2, K_2, ...]`. Cohort
/// weights are constant within a step. Mass born during the step enters the
/// burden seen by the inhibitor as `(c dt) B(t) V0` at stage offset `c`.
#[derive(Debug, Clone, Default)]
pub struct Stepper<T> {
    y0: Vec<T>,
    stage: Vec<T>,
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    weights: Vec<T>,
    v_start: Vec<T>,
    freeze_primary: bool,
}

impl<T: Scalar> Stepper<T> {
    pub fn new() -> Self {
        Self {
            y0: Vec::new(),
            stage: Vec::new(),
            k1: Vec::new(),
            k2: Vec::new(),
            k3: Vec::new(),
            k4: Vec::new(),
            weights: Vec::new(),
            v_start: Vec::new(),
            freeze_primary: false,
        }
    }

    /// Holds the primary tumor at its current state. Used to check the
    /// inhibitor balance against its closed form.
    pub fn with_frozen_primary(mut self) -> Self {
        self.freeze_primary = true;
        self
    }

    /// One full step: RK4 advance, removal through `V = V0`, spawning of the
    /// newborn cohort, pruning below `weight_floor`.
    ///
    /// Births over the step are the trapezoid integral of the birth rate.
    /// Each tumor's share is integrated separately so that a crossing of the
    /// emission threshold or of the exit boundary inside the step (located by
    /// linear interpolation of `V`) splits its trapezoid. The inhibitor
    /// produced by an exiting cohort after its crossing is taken back out.
    pub fn step(
        &mut self,
        s: &mut SystemState<T>,
        p: &ModelParams<T>,
        dt: T,
        weight_floor: T,
    ) -> Result<()> {
        let t_next = s.t + dt;
        let blowup = || Error::Blowup {
            time: t_next.as_f64(),
        };
        let birth_pre = birth_rate(s, p);
        let primary_start = s.primary.v;

        self.pack(s);
        self.advance(p, dt, birth_pre);
        if self.y0.iter().any(|x| !x.is_finite()) {
            return Err(blowup());
        }
        // start volumes of the cohorts, before unpack overwrites them
        self.v_start.clear();
        self.v_start.extend(s.cohorts.iter().map(|c| c.state.v));
        self.unpack(s);
        s.t = t_next;

        let mut births = emission_over_step(primary_start, s.primary.v, T::one(), p) * dt;
        let mut exited = T::zero();
        let mut overshoot = T::zero();
        let mut idx = 0;
        let v_start = &self.v_start;
        s.cohorts.retain(|c| {
            let (v_a, v_b) = (v_start[idx], c.state.v);
            idx += 1;
            if v_b >= p.v0 {
                births = births + c.weight * emission_over_step(v_a, v_b, T::one(), p) * dt;
                return true;
            }
            let reached = ((v_a - p.v0) / (v_a - v_b)).max(T::zero()).min(T::one());
            births = births + c.weight * emission_over_step(v_a, v_b, reached, p) * dt;
            let after = (T::one() - reached) * dt;
            overshoot = overshoot + c.weight * after * (p.v0 + v_b) / T::lit(2.0);
            exited = exited + c.weight;
            false
        });
        s.exited = s.exited + exited;
        s.inhibitor = (s.inhibitor - overshoot).max(T::zero());

        // Mass born over the step sits at mean age dt/2. The newborn's own
        // emission at the step end enters the trapezoid implicitly.
        let half = dt / T::lit(2.0);
        let newborn = rk4_single(birth_state(p), s.inhibitor, p, half);
        if !newborn.is_finite() {
            return Err(blowup());
        }
        let newborn_emission = emission_rate(newborn.v, p);
        let denom = T::one() - half * newborn_emission;
        if denom <= T::zero() {
            return Err(Error::Settings(format!(
                "dt = {dt} too large for birth rate {newborn_emission} per newborn"
            )));
        }
        let weight = births / denom;
        if !weight.is_finite() {
            return Err(blowup());
        }
        if weight > T::zero() {
            s.cohorts.push(Cohort {
                birth_time: s.t - half,
                weight,
                state: newborn,
            });
            s.born = s.born + weight;
        }

        if weight_floor > T::zero() {
            let mut pruned = T::zero();
            s.cohorts.retain(|c| {
                let keep = c.weight >= weight_floor;
                if !keep {
                    pruned = pruned + c.weight;
                }
                keep
            });
            s.exited = s.exited + pruned;
        }
        Ok(())
    }

    fn pack(&mut self, s: &SystemState<T>) {
        let n = 3 + 2 * s.cohorts.len();
        self.y0.clear();
        self.y0.reserve(n);
        self.y0
            .extend_from_slice(&[s.primary.v, s.primary.k, s.inhibitor]);
        self.weights.clear();
        for c in &s.cohorts {
            self.y0.push(c.state.v);
            self.y0.push(c.state.k);
            self.weights.push(c.weight);
        }
        for buf in [
            &mut self.stage,
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
        ] {
            buf.clear();
            buf.resize(n, T::zero());
        }
    }

    fn unpack(&self, s: &mut SystemState<T>) {
        s.primary = TumorState::new(self.y0[0], self.y0[1]);
        s.inhibitor = self.y0[2];
        for (c, vk) in s.cohorts.iter_mut().zip(self.y0[3..].chunks_exact(2)) {
            c.state = TumorState::new(vk[0], vk[1]);
        }
    }

    fn advance(&mut self, p: &ModelParams<T>, dt: T, birth_pre: T) {
        let two = T::lit(2.0);
        let half = dt / two;
        // burden of mass born since the start of the step, per unit offset
        let newborn_burden = birth_pre * p.v0;
        let freeze = self.freeze_primary;

        derivative(&self.y0, &self.weights, p, T::zero(), freeze, &mut self.k1);
        axpy(&mut self.stage, &self.y0, half, &self.k1);
        derivative(
            &self.stage,
            &self.weights,
            p,
            half * newborn_burden,
            freeze,
            &mut self.k2,
        );
        axpy(&mut self.stage, &self.y0, half, &self.k2);
        derivative(
            &self.stage,
            &self.weights,
            p,
            half * newborn_burden,
            freeze,
            &mut self.k3,
        );
        axpy(&mut self.stage, &self.y0, dt, &self.k3);
        derivative(
            &self.stage,
            &self.weights,
            p,
            dt * newborn_burden,
            freeze,
            &mut self.k4,
        );
        let sixth = dt / T::lit(6.0);
        for i in 0..self.y0.len() {
            self.y0[i] =
                self.y0[i] + sixth * (self.k1[i] + two * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Mean emission rate of one tumor over the first `reach` fraction of a
/// step along which `V` moves from `v_a` to `v_b`, times `reach`. Trapezoid
/// rule, split where `V` crosses the threshold `Vm`.
fn emission_over_step<T: Scalar>(v_a: T, v_b: T, reach: T, p: &ModelParams<T>) -> T {
    let half = T::lit(0.5);
    let v_end = v_a + (v_b - v_a) * reach;
    let (on_a, on_end) = (v_a >= p.vm, v_end >= p.vm);
    if on_a == on_end {
        return reach * half * (emission_rate(v_a, p) + emission_rate(v_end, p));
    }
    let at_threshold = p.m * p.vm.powf(p.alpha);
    let cross = (p.vm - v_a) / (v_b - v_a);
    if on_a {
        cross * half * (emission_rate(v_a, p) + at_threshold)
    } else {
        (reach - cross) * half * (at_threshold + emission_rate(v_end, p))
    }
}

fn axpy<T: Scalar>(out: &mut [T], y: &[T], h: T, k: &[T]) {
    for ((o, &yi), &ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + h * ki;
    }
}

fn derivative<T: Scalar>(
    y: &[T],
    weights: &[T],
    p: &ModelParams<T>,
    extra_burden: T,
    freeze_primary: bool,
    out: &mut [T],
) {
    let inhibitor = y[2];
    let cohorts = &y[3..];
    let burden: T = weights
        .iter()
        .zip(cohorts.chunks_exact(2))
        .map(|(&w, vk)| w * vk[0])
        .sum::<T>()
        + extra_burden;

    if freeze_primary {
        out[0] = T::zero();
        out[1] = T::zero();
    } else {
        let (dv, dk) = field_unchecked(y[0], y[1], inhibitor, p);
        out[0] = dv;
        out[1] = dk;
    }
    out[2] = y[0] + burden - p.k * inhibitor;
    for (o, vk) in out[3..].chunks_exact_mut(2).zip(cohorts.chunks_exact(2)) {
        let (dv, dk) = field_unchecked(vk[0], vk[1], inhibitor, p);
        o[0] = dv;
        o[1] = dk;
    }
}

/// RK4 over `h` of a single tumor under a frozen inhibitor amount.
pub(crate) fn rk4_single<T: Scalar>(
    s: TumorState<T>,
    inhibitor: T,
    p: &ModelParams<T>,
    h: T,
) -> TumorState<T> {
    let two = T::lit(2.0);
    let f = |v: T, k: T| field_unchecked(v, k, inhibitor, p);
    let (a1, b1) = f(s.v, s.k);
    let (a2, b2) = f(s.v + h / two * a1, s.k + h / two * b1);
    let (a3, b3) = f(s.v + h / two * a2, s.k + h / two * b2);
    let (a4, b4) = f(s.v + h * a3, s.k + h * b3);
    let sixth = h / T::lit(6.0);
    TumorState::new(
        s.v + sixth * (a1 + two * (a2 + a3) + a4),
        s.k + sixth * (b1 + two * (b2 + b3) + b4),
    )
}

/// Result of [`simulate`]: sampled observables plus the state at `t_end`.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub trajectory: Trajectory<T>,
    pub final_state: SystemState<T>,
}

/// Builder for a simulation run.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    params: ModelParams<T>,
    settings: SolverSettings<T>,
    initial_cohorts: Vec<Cohort<T>>,
    histogram_bins: usize,
    freeze_primary: bool,
}

impl<T: Scalar> Simulator<T> {
    pub fn new(params: ModelParams<T>, settings: SolverSettings<T>) -> Self {
        Self {
            params,
            settings,
            initial_cohorts: Vec::new(),
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            freeze_primary: false,
        }
    }

    pub fn initial_cohorts(mut self, cohorts: Vec<Cohort<T>>) -> Self {
        self.initial_cohorts = cohorts;
        self
    }

    pub fn histogram_bins(mut self, n: usize) -> Self {
        self.histogram_bins = n.max(1);
        self
    }

    /// Keeps the primary tumor at `(V0, K0)` for the whole run.
    pub fn frozen_primary(mut self) -> Self {
        self.freeze_primary = true;
        self
    }

    pub fn run(self) -> Result<Simulation<T>> {
        let p = &self.params;
        p.validate()?;
        self.settings.validate()?;
        let n_steps = self.settings.step_count()?;
        let stride = self.settings.sample_stride();
        let dt = self.settings.dt;

        let mut state = SystemState::with_cohorts(p, self.initial_cohorts)?;
        let mut stepper = Stepper::new();
        if self.freeze_primary {
            stepper = stepper.with_frozen_primary();
        }
        let mut trajectory = Trajectory::with_capacity(n_steps / stride + 2);
        trajectory.push(&state);
        for i in 1..=n_steps {
            stepper.step(&mut state, p, dt, self.settings.weight_floor)?;
            // re-anchor the clock to avoid drift from repeated addition
            state.t = T::count(i) * dt;
            if i % stride == 0 || i == n_steps {
                trajectory.push(&state);
            }
        }
        trajectory.final_histogram = histogram(&state, p, self.histogram_bins);
        Ok(Simulation {
            trajectory,
            final_state: state,
        })
    }
}

/// Runs from the initial state (primary at the birth state, `I = 0`) to
/// `settings.t_end`, sampling every `settings.sample_every`.
pub fn simulate<T: Scalar>(
    p: &ModelParams<T>,
    settings: &SolverSettings<T>,
    initial_cohorts: Vec<Cohort<T>>,
) -> Result<Simulation<T>> {
    Simulator::new(*p, *settings)
        .initial_cohorts(initial_cohorts)
        .run()
}
