//! Exact event-driven simulation of weighted sharing networks.
//!
//! Between jumps every rate is constant, so the next jump is drawn by
//! competing exponentials: the holding time is `−ln(u1)/Λ` for the total
//! rate `Λ`, and the event is found by locating `u2·Λ` in the fixed-order
//! rate partition `[λ_1, …, λ_J, μ_1 W_1, …, μ_J W_J]`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedSpec, StreamRng};
use crate::weights::WeightFunction;

/// Upper bound on jump records kept by full-mode recording.
pub const DEFAULT_RECORD_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl NetworkParams {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != mu.len() {
            return Err(Error::InvalidParams(format!(
                "need matching nonempty rate vectors, got {} arrival and {} service rates",
                lambda.len(),
                mu.len()
            )));
        }
        for (j, (&l, &m)) in lambda.iter().zip(&mu).enumerate() {
            if !(l.is_finite() && l > 0.0 && m.is_finite() && m > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "node {j}: rates must be finite and positive (lambda = {l}, mu = {m})"
                )));
            }
        }
        Ok(NetworkParams { lambda, mu })
    }

    pub fn nodes(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn rho(&self, j: usize) -> f64 {
        self.lambda[j] / self.mu[j]
    }

    pub fn rhos(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.rho(j)).collect()
    }

    pub fn rho_bar(&self) -> f64 {
        (0..self.nodes()).map(|j| self.rho(j)).sum()
    }
}

/// One queue facing a companion frozen at `n − 1` customers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatedParams {
    pub lambda: f64,
    pub mu: f64,
    pub n: u64,
}

impl SaturatedParams {
    pub fn new(lambda: f64, mu: f64, n: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0 && mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rates must be finite and positive (lambda = {lambda}, mu = {mu})"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("frozen level N must be >= 2, got {n}")));
        }
        Ok(SaturatedParams { lambda, mu, n })
    }

    /// `μ·log(1+x)/(log(1+x) + log N)`.
    pub fn death_rate(&self, x: u64) -> f64 {
        let w = (x as f64).ln_1p();
        if w == 0.0 {
            0.0
        } else {
            self.mu * w / (w + (self.n as f64).ln())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Arrival(usize),
    Departure(usize),
}

/// A continuous-time chain on `N^d` whose jumps are `±e_j`.
pub trait JumpModel: Sync {
    fn dim(&self) -> usize;

    /// Writes the `2·dim` rates: arrivals first, then departures.
    fn rates(&self, state: &[u64], out: &mut [f64]) -> Result<()>;
}

/// The `J+1`-node network sharing one unit of capacity through `f`.
#[derive(Debug, Clone)]
pub struct SharingNetwork {
    pub params: NetworkParams,
    pub weight: WeightFunction,
}

impl SharingNetwork {
    pub fn new(params: NetworkParams, weight: WeightFunction) -> Self {
        SharingNetwork { params, weight }
    }
}

impl JumpModel for SharingNetwork {
    fn dim(&self) -> usize {
        self.params.nodes()
    }

    #[inline]
    fn rates(&self, state: &[u64], out: &mut [f64]) -> Result<()> {
        let d = state.len();
        let (arr, dep) = out.split_at_mut(d);
        arr.copy_from_slice(&self.params.lambda);
        self.weight.allocation_into(state, dep)?;
        for (r, m) in dep.iter_mut().zip(&self.params.mu) {
            *r *= m;
        }
        Ok(())
    }
}

/// The one-dimensional saturated chain; with `Log` weights its death rate is
/// `μ·log(1+x)/(log(1+x)+log N)`.
#[derive(Debug, Clone)]
pub struct SaturatedQueue {
    pub params: SaturatedParams,
    pub weight: WeightFunction,
    frozen: f64,
}

impl SaturatedQueue {
    pub fn new(params: SaturatedParams, weight: WeightFunction) -> Result<Self> {
        let frozen = weight.eval(params.n - 1)?;
        Ok(SaturatedQueue { params, weight, frozen })
    }

    pub fn log(params: SaturatedParams) -> Self {
        SaturatedQueue { params, weight: WeightFunction::Log, frozen: (params.n as f64).ln() }
    }
}

impl JumpModel for SaturatedQueue {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn rates(&self, state: &[u64], out: &mut [f64]) -> Result<()> {
        out[0] = self.params.lambda;
        let w = self.weight.eval(state[0])?;
        out[1] = if w > 0.0 { self.params.mu * w / (w + self.frozen) } else { 0.0 };
        Ok(())
    }
}

/// Locates `u2·Λ` in the rate partition; `rates` holds arrivals then departures.
#[inline]
fn pick_event(rates: &[f64], total: f64, u2: f64) -> Event {
    let d = rates.len() / 2;
    let target = u2 * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            last_positive = k;
            acc += r;
            if target < acc {
                return index_event(k, d);
            }
        }
    }
    index_event(last_positive, d)
}

#[inline]
fn index_event(k: usize, d: usize) -> Event {
    if k < d {
        Event::Arrival(k)
    } else {
        Event::Departure(k - d)
    }
}

/// One jump of the network from `state`, given uniforms `u1 ∈ (0,1]`, `u2 ∈ [0,1)`.
pub fn next_event(
    state: &[u64],
    params: &NetworkParams,
    f: &WeightFunction,
    u1: f64,
    u2: f64,
) -> Result<(f64, Event)> {
    if state.len() != params.nodes() {
        return Err(Error::InvalidParams(format!(
            "state has {} entries for {} nodes",
            state.len(),
            params.nodes()
        )));
    }
    let model = SharingNetwork::new(params.clone(), f.clone());
    let mut rates = vec![0.0; 2 * state.len()];
    model.rates(state, &mut rates)?;
    let total: f64 = rates.iter().sum();
    Ok((-u1.ln() / total, pick_event(&rates, total, u2)))
}

/// A proposed jump: absolute epoch and event. Nothing changes until applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub at: f64,
    pub event: Event,
}

/// Sequential jump-chain generator for one replication.
pub struct Simulator<'m, M: JumpModel> {
    model: &'m M,
    state: Vec<u64>,
    time: f64,
    rates: Vec<f64>,
    rng: StreamRng,
}

impl<'m, M: JumpModel> Simulator<'m, M> {
    pub fn new(model: &'m M, initial: &[u64], seed: SeedSpec) -> Result<Self> {
        if initial.len() != model.dim() {
            return Err(Error::InvalidParams(format!(
                "initial state has {} entries, model has {}",
                initial.len(),
                model.dim()
            )));
        }
        Ok(Simulator {
            model,
            state: initial.to_vec(),
            time: 0.0,
            rates: vec![0.0; 2 * model.dim()],
            rng: seed.stream(),
        })
    }

    pub fn state(&self) -> &[u64] {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Draws the next jump from the current state without applying it.
    #[inline]
    pub fn propose(&mut self) -> Result<Jump> {
        self.model.rates(&self.state, &mut self.rates)?;
        let total: f64 = self.rates.iter().sum();
        let u1 = self.rng.uniform_open0();
        let u2 = self.rng.uniform();
        let event = pick_event(&self.rates, total, u2);
        Ok(Jump { at: self.time - u1.ln() / total, event })
    }

    #[inline]
    pub fn apply(&mut self, jump: Jump) {
        self.time = jump.at;
        match jump.event {
            Event::Arrival(j) => self.state[j] += 1,
            Event::Departure(j) => {
                debug_assert!(self.state[j] > 0, "departure from empty queue");
                self.state[j] -= 1
            }
        }
    }

    /// Runs to `horizon`, calling `visit(start, end, state)` for every
    /// holding interval clipped to `[0, horizon]`.
    pub fn run_intervals<F>(&mut self, horizon: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(f64, f64, &[u64]),
    {
        loop {
            let jump = self.propose()?;
            if jump.at >= horizon {
                visit(self.time, horizon, &self.state);
                self.time = horizon;
                return Ok(());
            }
            visit(self.time, jump.at, &self.state);
            self.apply(jump);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Record {
    /// Every jump.
    Full,
    /// `points ≥ 2` equispaced epochs on `[0, horizon]`.
    Grid(usize),
    /// Caller epochs, nondecreasing, inside `[0, horizon]`.
    At(Vec<f64>),
}

/// Piecewise-constant sample path stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub horizon: f64,
    pub epochs: Vec<f64>,
    pub states: Vec<u64>,
    pub record: Record,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[u64] {
        self.state(self.len() - 1)
    }

    /// State at the last record with epoch `≤ t`. In sampled modes this is
    /// exact only at the sampled epochs.
    pub fn state_at(&self, t: f64) -> Option<&[u64]> {
        let idx = self.epochs.partition_point(|&e| e <= t);
        (idx > 0).then(|| self.state(idx - 1))
    }

    pub fn column(&self, coord: usize) -> Vec<u64> {
        (0..self.len()).map(|i| self.state(i)[coord]).collect()
    }

    /// CSV rows `rep,t,x_1,…,x_d`.
    pub fn write_csv<W: Write>(&self, rep: u64, out: &mut W) -> std::io::Result<()> {
        for i in 0..self.len() {
            write!(out, "{rep},{}", self.epochs[i])?;
            for x in self.state(i) {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn sample_epochs(record: &Record, horizon: f64) -> Result<Option<Vec<f64>>> {
    match record {
        Record::Full => Ok(None),
        Record::Grid(points) => {
            if *points < 2 {
                return Err(Error::InvalidParams("grid recording needs at least 2 points".into()));
            }
            let step = horizon / (*points - 1) as f64;
            let mut g: Vec<f64> = (0..*points).map(|i| i as f64 * step).collect();
            g[*points - 1] = horizon;
            Ok(Some(g))
        }
        Record::At(epochs) => {
            if epochs.windows(2).any(|w| w[1] < w[0])
                || epochs.iter().any(|&e| !(0.0..=horizon).contains(&e))
            {
                return Err(Error::InvalidParams(
                    "sample epochs must be nondecreasing and inside [0, horizon]".into(),
                ));
            }
            Ok(Some(epochs.clone()))
        }
    }
}

/// Simulates any [`JumpModel`] up to `horizon`.
pub fn simulate_model<M: JumpModel>(
    model: &M,
    initial: &[u64],
    horizon: f64,
    seed: SeedSpec,
    record: &Record,
    budget: usize,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
    }
    let dim = model.dim();
    let mut sim = Simulator::new(model, initial, seed)?;
    let mut epochs = Vec::new();
    let mut states = Vec::new();
    match sample_epochs(record, horizon)? {
        None => {
            epochs.push(0.0);
            states.extend_from_slice(initial);
            loop {
                let jump = sim.propose()?;
                if jump.at > horizon {
                    break;
                }
                sim.apply(jump);
                if epochs.len() >= budget {
                    return Err(Error::Budget { recorded: epochs.len() + 1, limit: budget });
                }
                epochs.push(jump.at);
                states.extend_from_slice(sim.state());
            }
        }
        Some(grid) => {
            let mut k = 0;
            while k < grid.len() {
                let jump = sim.propose()?;
                while k < grid.len() && grid[k] < jump.at {
                    epochs.push(grid[k]);
                    states.extend_from_slice(sim.state());
                    k += 1;
                }
                sim.apply(jump);
            }
        }
    }
    Ok(Trajectory { dim, horizon, epochs, states, record: record.clone() })
}

pub fn simulate_path(
    initial: &[u64],
    params: &NetworkParams,
    f: &WeightFunction,
    horizon: f64,
    seed: SeedSpec,
    record: &Record,
) -> Result<Trajectory> {
    let model = SharingNetwork::new(params.clone(), f.clone());
    simulate_model(&model, initial, horizon, seed, record, DEFAULT_RECORD_BUDGET)
}

pub fn simulate_saturated(
    x0: u64,
    sp: SaturatedParams,
    horizon: f64,
    seed: SeedSpec,
    record: &Record,
) -> Result<Trajectory> {
    simulate_model(&SaturatedQueue::log(sp), &[x0], horizon, seed, record, DEFAULT_RECORD_BUDGET)
}

/// First-passage targets.
#[derive(Clone)]
pub enum Target {
    /// `x_coord ≥ level`.
    AtLeast { coord: usize, level: u64 },
    /// `|x_coord − center| ≤ half_width`.
    Band { coord: usize, center: f64, half_width: f64 },
    /// `|x_small / x_big^α − 1| ≤ κ`, never satisfied while `x_big = 0`.
    Ratio { small: usize, big: usize, alpha: f64, kappa: f64 },
    /// `x_small ∈ x_big^α ± √(x_big^α · log x_big)`, with the band following `x_big`.
    Tracking { small: usize, big: usize, alpha: f64 },
    Custom(Arc<dyn Fn(&[u64]) -> bool + Send + Sync>),
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::AtLeast { coord, level } => write!(f, "AtLeast(x{coord} >= {level})"),
            Target::Band { coord, center, half_width } => {
                write!(f, "Band(x{coord} in {center} ± {half_width})")
            }
            Target::Ratio { small, big, alpha, kappa } => {
                write!(f, "Ratio(|x{small}/x{big}^{alpha} - 1| <= {kappa})")
            }
            Target::Tracking { small, big, alpha } => write!(f, "Tracking(x{small} ~ x{big}^{alpha})"),
            Target::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Target {
    /// The band `N^α ± √(N^α log N)` around the local equilibrium level.
    pub fn local_eq_band(coord: usize, n: f64, alpha: f64) -> Self {
        let center = n.powf(alpha);
        Target::Band { coord, center, half_width: (center * n.ln()).sqrt() }
    }

    #[inline]
    pub fn holds(&self, state: &[u64]) -> bool {
        match self {
            Target::AtLeast { coord, level } => state[*coord] >= *level,
            Target::Band { coord, center, half_width } => {
                (state[*coord] as f64 - center).abs() <= *half_width
            }
            Target::Ratio { small, big, alpha, kappa } => {
                let b = state[*big];
                b > 0 && (state[*small] as f64 / (b as f64).powf(*alpha) - 1.0).abs() <= *kappa
            }
            Target::Tracking { small, big, alpha } => {
                let b = state[*big] as f64;
                if b < 1.0 {
                    return false;
                }
                let center = b.powf(*alpha);
                (state[*small] as f64 - center).abs() <= (center * b.ln()).sqrt()
            }
            Target::Custom(pred) => pred(state),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub time: f64,
    pub censored: bool,
}

/// First jump epoch at which `target` holds, checked on every jump of the
/// chain; `(cap, censored)` if it is not reached by `cap`.
pub fn first_passage<M: JumpModel>(
    model: &M,
    initial: &[u64],
    target: &Target,
    seed: SeedSpec,
    cap: f64,
) -> Result<Passage> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParams(format!("censoring cap must be positive, got {cap}")));
    }
    let mut sim = Simulator::new(model, initial, seed)?;
    if target.holds(sim.state()) {
        return Ok(Passage { time: 0.0, censored: false });
    }
    loop {
        let jump = sim.propose()?;
        if jump.at > cap {
            return Ok(Passage { time: cap, censored: true });
        }
        sim.apply(jump);
        if target.holds(sim.state()) {
            return Ok(Passage { time: jump.at, censored: false });
        }
    }
}

/// Censoring cap: a multiple of the expected-time bound being tested.
pub fn default_cap(expected_bound: f64) -> f64 {
    50.0 * expected_bound
}

/// Runs `task` for replications `0..reps`, replication `i` seeded with
/// `SeedSpec(master_seed, i)`. Output order is the replication order
/// whatever the thread count.
pub fn run_replications<T, F>(
    master_seed: u64,
    reps: u64,
    threads: Option<usize>,
    task: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(SeedSpec) -> Result<T> + Sync + Send,
{
    if reps == 0 {
        return Err(Error::InvalidParams("need at least one replication".into()));
    }
    let run = || -> Vec<Result<T>> {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                task(SeedSpec::new(master_seed, i))
                    .map_err(|e| Error::Replication { index: i, source: Box::new(e) })
            })
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    results.into_iter().collect()
}
