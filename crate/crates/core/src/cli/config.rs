//! Experiment configs: parsing, default filling and domain checks.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, FieldError, Result};
use crate::limits::{alpha_star, gamma_curve, PhaseTable};
use crate::weights::{WeightFamily, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    InitialPhase,
    LocalEq,
    OuFluct,
    Fluid,
    Hitting,
    HeavyTraffic,
    Phases,
    OracleCheck,
    GeneralF,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InitialPhase => "initial-phase",
            ExperimentKind::LocalEq => "local-eq",
            ExperimentKind::OuFluct => "ou-fluct",
            ExperimentKind::Fluid => "fluid",
            ExperimentKind::Hitting => "hitting",
            ExperimentKind::HeavyTraffic => "heavy-traffic",
            ExperimentKind::Phases => "phases",
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::GeneralF => "general-f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HittingVariant {
    /// First time the small queue reaches `δN^α*`.
    Job,
    /// First time the small queue enters the band around `L₂^α*`, from `xN`.
    Jac,
    /// First time the small queue enters the band around `N^α*`, from 0.
    Tajine,
}

/// Scaled-time grid of `points` equispaced values on `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.end - self.start) / (self.points - 1) as f64;
        let mut g: Vec<f64> = (0..self.points).map(|i| self.start + i as f64 * step).collect();
        g[self.points - 1] = self.end;
        g
    }
}

/// A normalized experiment config. After [`validate_config`] every field the
/// experiment uses is present; the others are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<HittingVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    /// Scale parameter `N`, or several for experiments that compare scales.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_offset: Option<f64>,
    /// Censoring cap as a multiple of the time scale being tested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<Vec<f64>>,
    /// Simulated time; heavy traffic counts it in units of `(1−ρ̄)⁻²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

macro_rules! getter {
    ($($name:ident: $ty:ty),* $(,)?) => {
        $(
            #[doc = concat!("`", stringify!($name), "`; panics on a config that was not normalized.")]
            pub fn $name(&self) -> $ty {
                self.$name.clone().unwrap_or_else(|| {
                    panic!("{} is not set for {}", stringify!($name), self.experiment.name())
                })
            }
        )*
    };
}

impl ExperimentConfig {
    getter! {
        variant: HittingVariant, lambda: Vec<f64>, mu: Vec<f64>, weight: WeightSpec,
        n: Vec<f64>, replications: u64, seed: u64, grid: GridSpec, start: Vec<u64>,
        delta: f64, x: f64, beta_offset: f64, cap_factor: f64, kappa: f64,
        ratio_kappa: f64, rho: Vec<f64>, rho1: f64, rho_bar: Vec<f64>, horizon: f64,
        burn_in: f64, spacing: f64, truncation: [usize; 2],
    }

    fn bare(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            variant: None,
            lambda: None,
            mu: None,
            weight: None,
            n: None,
            replications: None,
            seed: Some(0),
            grid: None,
            start: None,
            delta: None,
            x: None,
            beta_offset: None,
            cap_factor: None,
            kappa: None,
            ratio_kappa: None,
            rho: None,
            rho1: None,
            rho_bar: None,
            horizon: None,
            burn_in: None,
            spacing: None,
            truncation: None,
            out_dir: None,
        }
    }

    /// Defaults of an experiment, which also fix the fields it accepts.
    /// Fields whose default depends on other fields are filled in
    /// [`validate_config`].
    pub fn defaults(experiment: ExperimentKind, variant: Option<HittingVariant>) -> Self {
        use ExperimentKind::*;
        let grid = |start: f64, end: f64, points: usize| Some(GridSpec { start, end, points });
        let mut c = Self::bare(experiment);
        match experiment {
            InitialPhase => {
                c.lambda = Some(vec![1.0, 0.55]);
                c.mu = Some(vec![3.0, 1.0]);
                c.n = Some(vec![1e6]);
                c.replications = Some(100);
                c.grid = grid(0.15, 0.40, 26);
            }
            LocalEq | GeneralF => {
                c.lambda = Some(vec![1.0]);
                c.mu = Some(vec![3.0]);
                c.n = Some(vec![1e6]);
                c.replications = Some(if experiment == LocalEq { 100 } else { 20 });
                c.grid = grid(0.0, 2.0, 41);
                c.delta = Some(0.5);
                if experiment == GeneralF {
                    c.weight = Some(WeightSpec { family: WeightFamily::Loglog, beta: None, alpha: None });
                }
            }
            OuFluct => {
                c.lambda = Some(vec![1.0]);
                c.mu = Some(vec![3.0]);
                c.n = Some(vec![1e6]);
                c.replications = Some(50);
                c.grid = grid(0.0, 50.0, 501);
            }
            Fluid => {
                c.lambda = Some(vec![1.0, 0.5]);
                c.mu = Some(vec![3.0, 1.0]);
                c.n = Some(vec![1e5]);
                c.replications = Some(100);
                c.kappa = Some(0.15);
                c.ratio_kappa = Some(0.35);
            }
            Hitting => {
                let v = variant.unwrap_or(HittingVariant::Job);
                c.variant = Some(v);
                c.replications = Some(200);
                c.cap_factor = Some(50.0);
                match v {
                    HittingVariant::Job => {
                        c.lambda = Some(vec![1.0, 0.55]);
                        c.mu = Some(vec![3.0, 1.0]);
                        c.n = Some(vec![1e3, 1e4, 1e5]);
                        c.delta = Some(0.5);
                    }
                    HittingVariant::Jac => {
                        c.lambda = Some(vec![1.0, 0.6]);
                        c.mu = Some(vec![4.0, 1.0]);
                        c.n = Some(vec![1e5]);
                        c.x = Some(0.2);
                    }
                    HittingVariant::Tajine => {
                        c.lambda = Some(vec![1.0, 0.55]);
                        c.mu = Some(vec![3.0, 1.0]);
                        c.n = Some(vec![1e5]);
                        c.beta_offset = Some(0.1);
                    }
                }
            }
            HeavyTraffic => {
                c.mu = Some(vec![1.0, 1.0]);
                c.rho1 = Some(0.3);
                c.rho_bar = Some(vec![0.9, 0.98]);
                c.replications = Some(1);
                c.horizon = Some(4000.0);
                c.burn_in = Some(20.0);
                c.spacing = Some(1.0);
            }
            Phases => {
                c.rho = Some(vec![0.1, 0.2, 0.3]);
                c.grid = grid(0.0, 1.0, 101);
            }
            OracleCheck => {
                c.lambda = Some(vec![0.3, 0.3]);
                c.mu = Some(vec![1.0, 1.0]);
                c.weight = Some(WeightSpec::default());
                c.replications = Some(1);
                c.truncation = Some([60, 60]);
                c.horizon = Some(1e6);
                c.burn_in = Some(1e3);
            }
        }
        c
    }

    /// Loads `ρ_j = λ_j/μ_j`.
    pub fn rhos(&self) -> Vec<f64> {
        self.lambda().iter().zip(self.mu()).map(|(l, m)| l / m).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

macro_rules! fill {
    ($cfg:ident, $d:ident; $($f:ident),*) => { $( if $cfg.$f.is_none() { $cfg.$f = $d.$f.clone(); } )* };
}

/// Parses, default-fills and domain-checks a JSON config.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| Error::MalformedConfig(e.to_string()))?;
    validate_value(value)
}

/// Fields whose defaults depend on other fields.
fn derived_fields(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::InitialPhase | ExperimentKind::OuFluct => &["start"],
        ExperimentKind::Fluid => &["grid", "start"],
        _ => &[],
    }
}

fn field(path: &str, message: impl Into<String>) -> FieldError {
    FieldError { path: format!("$.{path}"), message: message.into() }
}

pub fn validate_value(value: Value) -> Result<ExperimentConfig> {
    let Value::Object(map) = &value else {
        return Err(Error::MalformedConfig("config must be a JSON object".into()));
    };
    let keys: Vec<String> = map.keys().cloned().collect();
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        Error::Config(vec![FieldError { path, message: e.into_inner().to_string() }])
    })?;

    let d = ExperimentConfig::defaults(cfg.experiment, cfg.variant);
    let allowed = serde_json::to_value(&d).expect("defaults serialize");
    let mut errors: Vec<FieldError> = keys
        .iter()
        .filter(|k| {
            k.as_str() != "out_dir"
                && allowed.get(k.as_str()).is_none()
                && !derived_fields(cfg.experiment).contains(&k.as_str())
        })
        .map(|k| field(k, format!("not used by experiment {}", cfg.experiment.name())))
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    fill!(cfg, d; variant, lambda, mu, weight, n, replications, seed, grid, start, delta, x,
        beta_offset, cap_factor, kappa, ratio_kappa, rho, rho1, rho_bar, horizon, burn_in,
        spacing, truncation);

    check_common(&cfg, &mut errors);
    if errors.is_empty() {
        check_specific(&mut cfg, &mut errors);
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn positive(path: &str, v: f64, errors: &mut Vec<FieldError>) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(field(path, format!("must be positive and finite, got {v}")));
    }
}

fn check_common(c: &ExperimentConfig, errors: &mut Vec<FieldError>) {
    if let (Some(l), Some(m)) = (&c.lambda, &c.mu) {
        if l.len() != m.len() {
            errors.push(field("mu", format!("has {} entries but lambda has {}", m.len(), l.len())));
        }
        for (i, v) in l.iter().enumerate() {
            positive(&format!("lambda[{i}]"), *v, errors);
        }
    }
    if let Some(m) = &c.mu {
        for (i, v) in m.iter().enumerate() {
            positive(&format!("mu[{i}]"), *v, errors);
        }
    }
    if let Some(ns) = &c.n {
        if ns.is_empty() {
            errors.push(field("n", "needs at least one value"));
        }
        for (i, &v) in ns.iter().enumerate() {
            if !(v >= 3.0 && v <= 9.007e15 && v.fract() == 0.0) {
                errors.push(field(&format!("n[{i}]"), format!("must be an integer in [3, 2^53], got {v}")));
            }
        }
    }
    if let Some(r) = c.replications {
        if !(1..=1_000_000).contains(&r) {
            errors.push(field("replications", format!("must be in [1, 1e6], got {r}")));
        }
    }
    if let Some(g) = &c.grid {
        if g.points < 2 || !(g.start.is_finite() && g.end.is_finite() && g.start < g.end) {
            errors.push(field("grid", "needs points >= 2 and finite start < end"));
        }
    }
    if let Some(w) = &c.weight {
        if let Err(e) = w.build() {
            errors.push(field("weight", e.to_string()));
        }
    }
    for (name, v) in [
        ("delta", c.delta),
        ("cap_factor", c.cap_factor),
        ("kappa", c.kappa),
        ("ratio_kappa", c.ratio_kappa),
        ("horizon", c.horizon),
        ("spacing", c.spacing),
        ("beta_offset", c.beta_offset),
    ] {
        if let Some(v) = v {
            positive(name, v, errors);
        }
    }
    for (name, v) in [("x", c.x), ("burn_in", c.burn_in)] {
        if let Some(v) = v {
            if !(v >= 0.0 && v.is_finite()) {
                errors.push(field(name, format!("must be nonnegative, got {v}")));
            }
        }
    }
}

fn nodes(c: &ExperimentConfig, want: Option<usize>, errors: &mut Vec<FieldError>) -> bool {
    let k = c.lambda().len();
    let ok = match want {
        Some(w) => k == w,
        None => k >= 2,
    };
    if !ok {
        let expect = want.map_or("at least 2".to_string(), |w| w.to_string());
        errors.push(field("lambda", format!("{} needs {expect} nodes, got {k}", c.experiment.name())));
    }
    ok
}

fn small_load(c: &ExperimentConfig, path: &str, rho1: f64, errors: &mut Vec<FieldError>) {
    if !(rho1 < 0.5) {
        errors.push(field(
            path,
            format!(
                "{} assumes rho1 < 1/2 (so that alpha* < 1), got rho1 = {rho1}",
                c.experiment.name()
            ),
        ));
    }
}

fn stable(rhos: &[f64], errors: &mut Vec<FieldError>) {
    let total: f64 = rhos.iter().sum();
    if !(total < 1.0) {
        errors.push(field("lambda", format!("total load {total} must be below 1")));
    }
}

fn check_start(c: &ExperimentConfig, errors: &mut Vec<FieldError>) {
    if let Some(s) = &c.start {
        let want = c.lambda.as_ref().map_or(s.len(), Vec::len);
        if s.len() != want {
            errors.push(field("start", format!("needs {want} entries, got {}", s.len())));
        }
    }
}

fn check_specific(c: &mut ExperimentConfig, errors: &mut Vec<FieldError>) {
    use ExperimentKind::*;
    let n0 = c.n.as_ref().map(|v| v[0]);
    match c.experiment {
        InitialPhase => {
            if nodes(c, None, errors) {
                let rhos = c.rhos();
                stable(&rhos, errors);
                if c.start.is_none() {
                    let mut s = vec![0; rhos.len()];
                    *s.last_mut().unwrap() = n0.unwrap() as u64;
                    c.start = Some(s);
                }
                check_start(c, errors);
                if c.grid().start < 0.0 {
                    errors.push(field("grid.start", "power-time grids start at t >= 0"));
                }
            }
        }
        LocalEq | OuFluct | GeneralF => {
            if nodes(c, Some(1), errors) {
                let rho = c.rhos()[0];
                small_load(c, "lambda[0]", rho, errors);
                if !errors.is_empty() {
                    return;
                }
                if c.grid().start < 0.0 {
                    errors.push(field("grid.start", "scaled time starts at t >= 0"));
                }
                if c.experiment == OuFluct && c.start.is_none() {
                    let a = alpha_star(rho).expect("rho1 < 1/2");
                    c.start = Some(vec![n0.unwrap().powf(a).floor() as u64]);
                }
                check_start(c, errors);
            }
        }
        Fluid => {
            if nodes(c, Some(2), errors) {
                let rhos = c.rhos();
                small_load(c, "lambda[0]", rhos[0], errors);
                stable(&rhos, errors);
                if !errors.is_empty() {
                    return;
                }
                let a = alpha_star(rhos[0]).expect("rho1 < 1/2");
                let n = n0.unwrap();
                if c.start.is_none() {
                    c.start = Some(vec![n.powf(a).floor() as u64, n as u64]);
                }
                check_start(c, errors);
                let t0 = gamma_curve(c.mu()[1], rhos[0], rhos[1], 0.0).t0;
                if c.grid.is_none() {
                    c.grid = Some(GridSpec { start: 0.0, end: 0.8 * t0, points: 201 });
                }
                let g = c.grid();
                if g.start < 0.0 || g.end > t0 {
                    errors.push(field("grid", format!("fluid window must lie in [0, t0 = {t0}]")));
                }
            }
        }
        Hitting => {
            if nodes(c, Some(2), errors) {
                let rhos = c.rhos();
                small_load(c, "lambda[0]", rhos[0], errors);
                stable(&rhos, errors);
                if c.variant() == HittingVariant::Jac {
                    if !(rhos[1] > 0.5) {
                        errors.push(field("lambda[1]", format!("jac assumes rho2 > 1/2, got {}", rhos[1])));
                    }
                    if c.x() > 1.0 {
                        errors.push(field("x", "initial fraction must be at most 1"));
                    }
                }
                if c.variant() == HittingVariant::Job && !(c.delta() < 1.0) {
                    errors.push(field("delta", "must be below 1"));
                }
            }
        }
        HeavyTraffic => {
            if c.mu().len() != 2 {
                errors.push(field("mu", "heavy-traffic needs 2 nodes"));
            }
            let r1 = c.rho1();
            if !(r1 > 0.0) {
                errors.push(field("rho1", format!("must be positive, got {r1}")));
            }
            small_load(c, "rho1", r1, errors);
            let rb = c.rho_bar();
            if rb.is_empty() {
                errors.push(field("rho_bar", "needs at least one value"));
            }
            for (i, &r) in rb.iter().enumerate() {
                if !(r > r1 && r < 1.0) {
                    errors.push(field(&format!("rho_bar[{i}]"), format!("must lie in (rho1, 1), got {r}")));
                }
            }
            if c.burn_in() >= c.horizon() {
                errors.push(field("burn_in", "must be below horizon"));
            }
        }
        Phases => {
            if let Err(e) = PhaseTable::new(&c.rho()) {
                errors.push(field("rho", e.to_string()));
            }
            if c.grid().start < 0.0 {
                errors.push(field("grid.start", "power-time grids start at t >= 0"));
            }
        }
        OracleCheck => {
            if nodes(c, Some(2), errors) {
                stable(&c.rhos(), errors);
                let [k1, k2] = c.truncation();
                if k1 < 2 || k2 < 2 || (k1 + 1) * (k2 + 1) > 4_000_000 {
                    errors.push(field("truncation", "needs 2 <= K and (K1+1)(K2+1) <= 4e6"));
                }
                if c.burn_in() >= c.horizon() {
                    errors.push(field("burn_in", "must be below horizon"));
                }
            }
        }
    }
}
