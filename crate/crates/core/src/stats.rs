//! Estimators comparing simulated paths with the limit curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::ScalingLens;
use crate::rng::SeedSpec;
use crate::sim::{JumpModel, Passage, Record, Simulator, Trajectory};

/// One replication seen through a lens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPath {
    pub lens: ScalingLens,
    pub grid: Vec<f64>,
    /// `values[c][i]`: component `c` at `grid[i]`.
    pub values: Vec<Vec<f64>>,
    pub replication: u64,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("scaled grid must be nonempty and strictly increasing".into()));
    }
    Ok(())
}

/// Raw state at raw time `s`. Sampled trajectories must have been sampled
/// at (a float rounding of) `s`.
fn raw_state(traj: &Trajectory, s: f64) -> Result<&[u64]> {
    if s > traj.horizon * (1.0 + 1e-12) || s < 0.0 {
        return Err(Error::Domain(format!(
            "raw time {s} outside the simulated horizon {}",
            traj.horizon
        )));
    }
    match traj.record {
        Record::Full => Ok(traj.state_at(s).expect("full paths start at 0")),
        _ => {
            let slack = 1e-9 * s.abs().max(1.0);
            let idx = traj.epochs.partition_point(|&e| e <= s + slack);
            if idx == 0 || (traj.epochs[idx - 1] - s).abs() > slack {
                return Err(Error::Domain(format!("raw time {s} is not a sampled epoch")));
            }
            Ok(traj.state(idx - 1))
        }
    }
}

/// Raw sampling epochs for a scaled grid, for use with `Record::At`.
pub fn raw_epochs(lens: &ScalingLens, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&t| lens.time_forward(t)).collect()
}

pub fn rescale_path(
    traj: &Trajectory,
    lens: &ScalingLens,
    grid: &[f64],
    replication: u64,
) -> Result<ScaledPath> {
    check_grid(grid)?;
    let mut values = vec![Vec::with_capacity(grid.len()); traj.dim];
    for &t in grid {
        let state = raw_state(traj, lens.time_forward(t))?;
        for (c, &x) in state.iter().enumerate() {
            values[c].push(lens.space(c, traj.dim, t, x as f64));
        }
    }
    Ok(ScaledPath { lens: lens.clone(), grid: grid.to_vec(), values, replication })
}

/// `x_small / x_big^α` at the lens-forward times of `grid`; infinite when
/// the big coordinate is empty.
pub fn ratio_path(
    traj: &Trajectory,
    lens: &ScalingLens,
    grid: &[f64],
    small: usize,
    big: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&t| {
            let s = raw_state(traj, lens.time_forward(t))?;
            Ok(if s[big] == 0 { f64::INFINITY } else { s[small] as f64 / (s[big] as f64).powf(alpha) })
        })
        .collect()
}

/// Linear-interpolated quantile of unsorted data, `p ∈ [0,1]`.
pub fn quantile(data: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = data.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, p)
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || v[hi].is_infinite() {
        v[lo.max(if v[hi].is_infinite() { hi } else { lo })]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

fn mean_se(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    if data.len() < 2 {
        return (m, 0.0);
    }
    let var = data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub kappa: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    /// Point estimate, absent when every observation is censored.
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub replications: usize,
    pub censored_fraction: f64,
    /// Censoring turned the estimate into a lower bound.
    pub lower_bound: bool,
    /// `(p, q_p)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceedance: Option<Exceedance>,
    /// Per-replication statistic the report summarizes.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl EstimatorReport {
    fn from_samples(samples: Vec<f64>, censored_fraction: f64) -> Self {
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        let (estimate, std_error) = if finite.is_empty() {
            (None, None)
        } else {
            let (m, se) = mean_se(&finite);
            (Some(m), Some(se))
        };
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let quantiles =
            [0.1, 0.5, 0.9].iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect();
        EstimatorReport {
            estimate,
            std_error,
            replications: samples.len(),
            censored_fraction,
            lower_bound: false,
            quantiles,
            exceedance: None,
            samples,
        }
    }

    /// Fraction of replications whose statistic exceeds `kappa`.
    pub fn exceedance_fraction(&self, kappa: f64) -> f64 {
        self.samples.iter().filter(|&&s| s > kappa).count() as f64 / self.samples.len() as f64
    }

    pub fn median(&self) -> f64 {
        median(&self.samples)
    }
}

/// Per replication, the grid sup of `|value − curve(t)|` over `[a, b]` for
/// one component, with the fraction of sups above `kappa`.
pub fn sup_deviation<C: Fn(f64) -> f64>(
    paths: &[ScaledPath],
    component: usize,
    curve: C,
    window: (f64, f64),
    kappa: f64,
) -> Result<EstimatorReport> {
    let series: Vec<(&[f64], &[f64])> =
        paths.iter().map(|p| (p.grid.as_slice(), p.values[component].as_slice())).collect();
    sup_deviation_series(&series, curve, window, kappa)
}

/// As [`sup_deviation`] on bare `(grid, values)` series.
pub fn sup_deviation_series<C: Fn(f64) -> f64>(
    series: &[(&[f64], &[f64])],
    curve: C,
    window: (f64, f64),
    kappa: f64,
) -> Result<EstimatorReport> {
    if series.is_empty() {
        return Err(Error::InvalidParams("no paths to summarize".into()));
    }
    let mut sups = Vec::with_capacity(series.len());
    for (grid, values) in series {
        let (a, b) = window;
        if grid.first().is_none_or(|&g| g > a + 1e-12) || grid.last().is_none_or(|&g| g < b - 1e-12) {
            return Err(Error::Domain(format!("window [{a}, {b}] is not inside the path grid")));
        }
        let sup = grid
            .iter()
            .zip(values.iter())
            .filter(|(t, _)| **t >= a - 1e-12 && **t <= b + 1e-12)
            .map(|(&t, &v)| (v - curve(t)).abs())
            .fold(0.0f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
        sups.push(sup);
    }
    let mut report = EstimatorReport::from_samples(sups, 0.0);
    report.exceedance = Some(Exceedance { kappa, fraction: report.exceedance_fraction(kappa) });
    Ok(report)
}

/// Replication median of `|value − curve(t)|` at each grid point in `[a, b]`.
pub fn pointwise_median_deviation<C: Fn(f64) -> f64>(
    paths: &[ScaledPath],
    component: usize,
    curve: C,
    window: (f64, f64),
) -> Result<Vec<(f64, f64)>> {
    let first = paths.first().ok_or_else(|| Error::InvalidParams("no paths".into()))?;
    if paths.iter().any(|p| p.grid != first.grid) {
        return Err(Error::InvalidParams("paths must share one grid".into()));
    }
    let (a, b) = window;
    Ok(first
        .grid
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= a - 1e-12 && t <= b + 1e-12)
        .map(|(i, &t)| {
            let c = curve(t);
            let devs: Vec<f64> = paths.iter().map(|p| (p.values[component][i] - c).abs()).collect();
            (t, median(&devs))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuFit {
    pub theta_hat: f64,
    pub sigma2_hat: f64,
    pub stationary_var_hat: f64,
    pub theta_se: f64,
    pub var_se: f64,
    pub lag1: f64,
}

struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
    cross: f64,
    pairs: f64,
}

fn moments(x: &[f64]) -> Moments {
    let mut m = Moments { n: 0.0, sum: 0.0, sum_sq: 0.0, cross: 0.0, pairs: 0.0 };
    for (i, &v) in x.iter().enumerate() {
        m.n += 1.0;
        m.sum += v;
        m.sum_sq += v * v;
        if i + 1 < x.len() {
            m.pairs += 1.0;
        }
    }
    m.cross = x.windows(2).map(|w| w[0] * w[1]).sum();
    m
}

fn fit_from(paths: &[&[f64]], dt: f64) -> Result<(f64, f64, f64)> {
    let all: Vec<Moments> = paths.iter().map(|p| moments(p)).collect();
    let n: f64 = all.iter().map(|m| m.n).sum();
    let mean = all.iter().map(|m| m.sum).sum::<f64>() / n;
    let var = all.iter().map(|m| m.sum_sq).sum::<f64>() / n - mean * mean;
    if !(var > 1e-300) {
        return Err(Error::FitFailure("sample variance is zero".into()));
    }
    // centred lag-1 products: Σ (x_i − m)(x_{i+1} − m)
    let mut cov = 0.0;
    let mut pairs = 0.0;
    for p in paths {
        for w in p.windows(2) {
            cov += (w[0] - mean) * (w[1] - mean);
        }
        pairs += (p.len().saturating_sub(1)) as f64;
    }
    let lag1 = cov / pairs / var;
    if !(lag1 > 0.0) {
        return Err(Error::FitFailure(format!(
            "lag-1 autocorrelation {lag1} is not positive; path too short or not mean-reverting"
        )));
    }
    let theta = -lag1.ln() / dt;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::FitFailure(format!("lag-1 autocorrelation {lag1} gives no decay rate")));
    }
    Ok((theta, var, lag1))
}

/// Lag-1 autoregression fit of an Ornstein–Uhlenbeck path sampled every `dt`.
/// Standard errors come from ten contiguous batches.
pub fn fit_ou(path: &[f64], dt: f64) -> Result<OuFit> {
    if path.len() < 20 {
        return Err(Error::FitFailure(format!("path of length {} is too short", path.len())));
    }
    let (theta, var, lag1) = fit_from(&[path], dt)?;
    let b = path.len() / 10;
    let batches: Vec<&[f64]> = path.chunks(b).filter(|c| c.len() == b).collect();
    let (theta_se, var_se) = batch_errors(&batches, dt);
    Ok(OuFit { theta_hat: theta, sigma2_hat: 2.0 * theta * var, stationary_var_hat: var, theta_se, var_se, lag1 })
}

/// Pooled fit over independent replications; each replication is a batch.
pub fn fit_ou_pooled(paths: &[Vec<f64>], dt: f64) -> Result<OuFit> {
    if paths.is_empty() {
        return Err(Error::FitFailure("no paths".into()));
    }
    let refs: Vec<&[f64]> = paths.iter().map(|p| p.as_slice()).collect();
    let (theta, var, lag1) = fit_from(&refs, dt)?;
    let (theta_se, var_se) = batch_errors(&refs, dt);
    Ok(OuFit { theta_hat: theta, sigma2_hat: 2.0 * theta * var, stationary_var_hat: var, theta_se, var_se, lag1 })
}

fn batch_errors(batches: &[&[f64]], dt: f64) -> (f64, f64) {
    let fits: Vec<(f64, f64)> = batches
        .iter()
        .filter_map(|b| fit_from(&[b], dt).ok().map(|(t, v, _)| (t, v)))
        .collect();
    if fits.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let thetas: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let vars: Vec<f64> = fits.iter().map(|f| f.1).collect();
    (mean_se(&thetas).1, mean_se(&vars).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub ks_stat: f64,
    /// `(sample mean)·η`.
    pub mean_ratio: f64,
    pub n: usize,
}

/// One-sample Kolmogorov–Smirnov statistic against `Exp(η)`.
pub fn ks_exponential(samples: &[f64], eta: f64) -> Result<KsResult> {
    if samples.len() < 30 {
        return Err(Error::Domain(format!("KS needs at least 30 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain("KS samples must be positive and finite".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("rate must be positive, got {eta}")));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let cdf = -(-eta * x).exp_m1();
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    let mean = v.iter().sum::<f64>() / n;
    Ok(KsResult { ks_stat: d, mean_ratio: mean * eta, n: v.len() })
}

/// Summary of `time/scale` over replications. Censored observations enter
/// at their cap, which makes the mean a lower bound.
pub fn summarize_hitting(times: &[Passage], scale: f64) -> Result<EstimatorReport> {
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    if times.is_empty() {
        return Err(Error::InvalidParams("no hitting times".into()));
    }
    let censored = times.iter().filter(|p| p.censored).count();
    let samples: Vec<f64> = times.iter().map(|p| p.time / scale).collect();
    let mut report = EstimatorReport::from_samples(samples, censored as f64 / times.len() as f64);
    if censored == times.len() {
        report.estimate = None;
        report.std_error = None;
    }
    report.lower_bound = censored > 0;
    Ok(report)
}

/// Time-weighted occupancy of a long run after `burn_in`, on the states
/// `index` maps into `0..size`; the rest is reported as `outside`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub probs: Vec<f64>,
    pub outside: f64,
}

impl Occupancy {
    pub fn tv_distance(&self, reference: &[f64]) -> f64 {
        0.5 * (self.probs.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + self.outside)
    }
}

pub fn empirical_occupancy<M, I>(
    model: &M,
    initial: &[u64],
    burn_in: f64,
    horizon: f64,
    seed: SeedSpec,
    size: usize,
    index: I,
) -> Result<Occupancy>
where
    M: JumpModel,
    I: Fn(&[u64]) -> Option<usize>,
{
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::InvalidParams("need 0 <= burn_in < horizon".into()));
    }
    let mut sim = Simulator::new(model, initial, seed)?;
    let mut acc = vec![0.0; size];
    let mut outside = 0.0;
    sim.run_intervals(horizon, |a, b, s| {
        let a = a.max(burn_in);
        if b > a {
            match index(s) {
                Some(i) if i < size => acc[i] += b - a,
                _ => outside += b - a,
            }
        }
    })?;
    let total = horizon - burn_in;
    Ok(Occupancy { probs: acc.iter().map(|v| v / total).collect(), outside: outside / total })
}

/// Simulates and rescales in one step, sampling exactly at the lens-forward
/// epochs of `grid`.
pub fn scaled_replication<M: JumpModel>(
    model: &M,
    initial: &[u64],
    lens: &ScalingLens,
    grid: &[f64],
    seed: SeedSpec,
) -> Result<ScaledPath> {
    check_grid(grid)?;
    let epochs = raw_epochs(lens, grid);
    let horizon = *epochs.last().expect("grid is nonempty");
    let traj = crate::sim::simulate_model(
        model,
        initial,
        horizon,
        seed,
        &Record::At(epochs),
        crate::sim::DEFAULT_RECORD_BUDGET,
    )?;
    rescale_path(&traj, lens, grid, seed.replication_index)
}
