//! Acceptance suite. Runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any line fails.
//!
//! `cargo test --release --test acceptance -- C2 C7` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use logshare::cli::{run_experiment, validate_config, Bound, ExperimentOutput};
use logshare::limits::{
    alpha_star, general_time_scales, h_curve, hn_expansion, PhaseTable, DEFAULT_TOL,
};
use logshare::oracle::{bd_stationary, quadrature_h};
use logshare::sim::SaturatedParams;
use logshare::weights::WeightFunction;
use logshare::SeedSpec;

struct Line {
    id: String,
    what: String,
    value: f64,
    bound: String,
    pass: bool,
    detail: String,
}

fn experiment(json: &str) -> ExperimentOutput {
    let cfg = validate_config(json).unwrap_or_else(|e| panic!("config {json}: {e}"));
    run_experiment(&cfg, None).unwrap_or_else(|e| panic!("{json}: {e}"))
}

fn from_report(id: &str, what: &str, out: &ExperimentOutput, name: &str, detail: String) -> Line {
    let c = out
        .report
        .criterion(name)
        .unwrap_or_else(|| panic!("{id}: report has no criterion {name}"));
    Line {
        id: id.into(),
        what: what.into(),
        value: c.statistic,
        bound: c.bound.to_string(),
        pass: c.pass,
        detail,
    }
}

fn diag(out: &ExperimentOutput, key: &str) -> f64 {
    out.report.diagnostics.get(key).copied().unwrap_or(f64::NAN)
}

fn line(id: &str, what: &str, value: f64, bound: Bound, detail: String) -> Line {
    Line { id: id.into(), what: what.into(), value, bound: bound.to_string(), pass: bound.holds(value), detail }
}

fn c1() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"initial-phase","lambda":[1,0.55],"mu":[3,1],"n":[1000000],
            "replications":100,"grid":{"start":0.15,"end":0.40,"points":26}}"#,
    );
    let detail = format!(
        "max median dev of simulation from the finite-N drift = {:.3}",
        diag(&out, "max_median_dev_from_drift_node1")
    );
    vec![from_report("C1", "initial phase, max median |L1(N^t)/N^t - curve|", &out, "max_median_dev_node1", detail)]
}

fn c2() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"local-eq","lambda":[1],"mu":[3],"n":[1000000],"delta":0.5,
            "replications":100,"grid":{"start":0,"end":2,"points":41}}"#,
    );
    let detail = format!("against h_N instead: {:.4}", diag(&out, "max_median_dev_h_n"));
    vec![from_report("C2", "local equilibrium, max median |X/N^a - h|", &out, "max_median_dev", detail)]
}

fn c3() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"ou-fluct","lambda":[1],"mu":[3],"n":[1000000],"replications":50,
            "grid":{"start":0,"end":50,"points":501}}"#,
    );
    let d = |k| diag(&out, k);
    vec![
        from_report(
            "C3a",
            "OU rate, |theta_hat/theta - 1|",
            &out,
            "theta_rel_err",
            format!("theta_hat = {:.4} +- {:.4}, theta = {:.4}", d("theta_hat"), d("theta_se"), d("theta")),
        ),
        from_report(
            "C3b",
            "OU stationary variance, relative error",
            &out,
            "stationary_var_rel_err",
            format!("var_hat = {:.4} +- {:.4}, var = {:.4}", d("stationary_var_hat"), d("stationary_var_se"), d("stationary_var")),
        ),
    ]
}

fn c4() -> Vec<Line> {
    let a = alpha_star(1.0 / 3.0).unwrap();
    let e = hn_expansion(0.5, 3.0, a, 1e8, 1.0, 1e-12).unwrap();
    vec![line(
        "C4",
        "h_N expansion, |(h - h_N) log N / stated correction - 1|",
        (e.scaled_gap / e.stated_correction - 1.0).abs(),
        Bound::AtMost(0.05),
        format!(
            "(h - h_N) log N = {:.5}, stated correction = {:.5}, linearized limit = {:.5}",
            e.scaled_gap, e.stated_correction, e.linearized_correction
        ),
    )]
}

fn c5() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"fluid","lambda":[1,0.5],"mu":[3,1],"n":[100000],"replications":100,
            "kappa":0.15,"ratio_kappa":0.35}"#,
    );
    vec![
        from_report(
            "C5a",
            "fluid, fraction with sup |L2/N - gamma| > 0.15",
            &out,
            "l2_exceedance",
            format!("median sup = {:.4}", diag(&out, "median_sup_l2")),
        ),
        from_report(
            "C5b",
            "fluid, fraction with sup |L1/L2^a - 1| > 0.35",
            &out,
            "ratio_exceedance",
            format!(
                "median sup = {:.3}; fluctuation sd at t=0 = {:.3}; max pointwise median dev = {:.3}",
                diag(&out, "median_sup_ratio"),
                diag(&out, "ratio_fluctuation_sd_t0"),
                diag(&out, "max_pointwise_median_ratio_dev")
            ),
        ),
    ]
}

fn c6() -> Vec<Line> {
    let job = experiment(
        r#"{"experiment":"hitting","variant":"job","lambda":[1,0.55],"mu":[3,1],
            "n":[1000,10000,100000],"delta":0.5,"replications":200}"#,
    );
    let jac = experiment(
        r#"{"experiment":"hitting","variant":"jac","lambda":[1,0.6],"mu":[4,1],"n":[100000],
            "x":0.2,"replications":200}"#,
    );
    let taj = experiment(
        r#"{"experiment":"hitting","variant":"tajine","lambda":[1,0.55],"mu":[3,1],"n":[100000],
            "beta_offset":0.1,"replications":200}"#,
    );
    vec![
        from_report(
            "C6a",
            "hitting of 0.5 N^a, max/min of mean H/(N^a log N) over N",
            &job,
            "job_max_over_min",
            format!("means between {:.3} and {:.3}", diag(&job, "job_min_mean"), diag(&job, "job_max_mean")),
        ),
        from_report(
            "C6b",
            "band around L2^a, |mean(T_N/N)/0.2 - 1|",
            &jac,
            "jac_rel_err_n100000",
            format!(
                "mean T_N/N = {:.4}; finite-N drift predicts {:.4}",
                diag(&jac, "jac_mean_n100000"),
                diag(&jac, "jac_finite_n_drift_n100000")
            ),
        ),
        from_report(
            "C6c",
            "band around N^a, fraction with T_N <= N^b (log N)^2",
            &taj,
            "tajine_fraction_n100000",
            String::new(),
        ),
    ]
}

fn c7() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"heavy-traffic","mu":[1,1],"rho1":0.3,"rho_bar":[0.9,0.98]}"#,
    );
    let d = |k| diag(&out, k);
    let which = out.report.notes.iter().find(|n| n.contains("matches")).cloned().unwrap_or_default();
    vec![
        from_report(
            "C7i",
            "heavy traffic, KS(0.98) - KS(0.90)",
            &out,
            "ks_decrease",
            format!("KS = {:.4} -> {:.4}", d("ks_stat_rb0.9"), d("ks_stat_rb0.98")),
        ),
        from_report("C7ii", "heavy traffic, min relative error of the mean to a constant", &out, "mean_matches_a_constant", which),
        from_report("C7iii", "heavy traffic, median L1/L2^a at 0.98", &out, "median_ratio", String::new()),
    ]
}

fn c8() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"oracle-check","lambda":[0.3,0.3],"mu":[1,1],"truncation":[60,60],
            "horizon":1000000}"#,
    );
    vec![from_report(
        "C8",
        "TV(truncated solve, simulated occupancy)",
        &out,
        "tv",
        format!("generator residual {:.1e}, tail mass {:.1e}", diag(&out, "generator_residual"), diag(&out, "tail_mass")),
    )]
}

fn c9() -> Vec<Line> {
    let clock = Instant::now();
    let mut rng = SeedSpec::new(9, 0).stream();
    let mut out = Vec::new();

    // detailed balance of the saturated chain
    let sp = SaturatedParams::new(1.0, 3.0, 100).unwrap();
    let d = bd_stationary(&sp, 200).unwrap();
    let db = (0..200)
        .map(|x| (d.probs[x] * sp.lambda - d.probs[x + 1] * sp.death_rate(x as u64 + 1)).abs())
        .fold(0.0, f64::max);
    out.push(line("C9.1", "detailed balance residual", db, Bound::Below(1e-14), String::new()));

    // allocation on random states: simplex, invariance under f -> c f and,
    // for power weights, under x -> c x
    let log = WeightFunction::Log;
    let scaled = WeightFunction::custom("3log", |x: f64| 3.0 * (1.0 + x).ln()).unwrap();
    let pow = WeightFunction::power(0.5).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = 1 + (rng.next_u64() % 6) as usize;
        let s: Vec<u64> = (0..k).map(|_| rng.next_u64() % 1000).collect();
        let a = log.allocation_vector(&s).unwrap();
        let total: f64 = a.iter().sum();
        let expect = if s.iter().all(|&x| x == 0) { 0.0 } else { 1.0 };
        worst = worst.max((total - expect).abs());
        worst = worst.max(a.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
        let b = scaled.allocation_vector(&s).unwrap();
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        let s3: Vec<u64> = s.iter().map(|x| 3 * x).collect();
        let p = pow.allocation_vector(&s).unwrap();
        let p3 = pow.allocation_vector(&s3).unwrap();
        worst = worst.max(p.iter().zip(&p3).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    out.push(line("C9.2", "allocation simplex and scaling invariance", worst, Bound::AtMost(1e-12), String::new()));

    // drift identity; the left side cancels near x + 1 = N^a, so the
    // comparison carries an absolute floor at that cancellation level
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = 0.01 + 0.98 * rng.uniform();
        let n = 2.0 + 1e9 * rng.uniform();
        let x = (rng.uniform() * 1e7).floor() + 1.0;
        let ln = n.ln();
        let lhs = (1.0 + x).ln() / ((1.0 + x).ln() + ln) - a / (a + 1.0);
        let r = (1.0 + x).ln() - a * ln;
        let rhs = r / ((a + 1.0) * ln * (1.0 + a + r / ln));
        let err = (lhs - rhs).abs() / (rhs.abs() + 1e-4);
        worst = worst.max(err);
    }
    out.push(line("C9.3", "drift identity, relative error", worst, Bound::AtMost(1e-12), String::new()));

    // phase-table continuity
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = 2 + (rng.next_u64() % 6) as usize;
        let mut r: Vec<f64> = (0..k).map(|_| rng.uniform_open0()).collect();
        r.sort_by(|a, b| a.total_cmp(b));
        let total = 0.999 * rng.uniform_open0() / r.iter().sum::<f64>();
        r.iter_mut().for_each(|v| *v *= total);
        let Ok(t) = PhaseTable::new(&r) else { continue };
        for (i, &tk) in t.breakpoints().iter().enumerate() {
            let kk = i + 1;
            if !tk.is_finite() {
                continue;
            }
            for j in 1..kk {
                worst = worst.max((t.alpha(j, kk, tk) - t.alpha(j, kk + 1, tk)).abs());
            }
            worst = worst.max((tk - t.alpha(kk, kk + 1, tk)).abs());
        }
    }
    out.push(line("C9.4", "phase table continuity", worst, Bound::AtMost(1e-12), String::new()));

    // h by ODE against h by quadrature
    let mut worst = 0.0f64;
    for &(delta, t) in &[(0.5, 0.3), (0.5, 1.0), (0.2, 2.0), (0.9, 0.7), (0.99, 1.0), (0.05, 3.0)] {
        let ode = h_curve(delta, 3.0, 0.5, t, DEFAULT_TOL).unwrap();
        let q = quadrature_h(delta, 3.0, 0.5, t, 1e-13).unwrap().value;
        worst = worst.max((ode - q).abs());
    }
    out.push(line("C9.5", "h ODE vs quadrature", worst, Bound::AtMost(1e-8), String::new()));

    // time-scale closed forms
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut worst = 0.0f64;
    let e = std::f64::consts::E;
    let n = e.powf(e * e);
    let s = general_time_scales(&WeightFunction::LogLog, n, 0.5).unwrap();
    let ln = n.ln();
    worst = worst.max(rel(s.phi(0.5), ln.sqrt().exp()));
    worst = worst.max(rel(s.psi_n, ln.sqrt().exp() * ln.sqrt() * ln.ln()));
    for &(beta, n, a) in &[(1.0f64, 1e6f64, 0.5f64), (2.0, 1e8, 0.5), (2.0, 1e12, 0.3)] {
        let s = general_time_scales(&WeightFunction::log_pow(beta).unwrap(), n, a).unwrap();
        worst = worst.max(rel(s.phi(0.3), n.powf(0.3f64.powf(1.0 / beta))));
        let psi = beta * a.powf(1.0 - 1.0 / beta) * n.powf(a.powf(1.0 / beta)) * n.ln().powf(2.0 * beta - 1.0);
        worst = worst.max(rel(s.psi_n, psi));
    }
    out.push(line("C9.6", "time-scale closed forms", worst, Bound::AtMost(1e-10), String::new()));

    let s = general_time_scales(&WeightFunction::log_pow(1.0).unwrap(), 1e6, 0.5).unwrap();
    let worst = (1..10).map(|i| rel(s.phi(i as f64 / 10.0), 1e6f64.powf(i as f64 / 10.0))).fold(0.0, f64::max);
    out.push(line("C9.7", "LogPow(1) phi_N(t) = N^t", worst, Bound::AtMost(1e-10), String::new()));

    let secs = clock.elapsed().as_secs_f64();
    out.push(line("C9.8", "exact suite wall time (s)", secs, Bound::Below(1.0), String::new()));
    out
}

fn c10() -> Vec<Line> {
    let out = experiment(
        r#"{"experiment":"initial-phase","lambda":[1,2,3],"mu":[10,10,10],"n":[1000000],
            "replications":100,"grid":{"start":0.03,"end":0.10,"points":15}}"#,
    );
    let detail = format!(
        "max median dev of simulation from the finite-N drift = {:.3}",
        diag(&out, "max_median_dev_from_drift_node1")
    );
    vec![from_report("C10", "multi-node initial phase, max median dev", &out, "max_median_dev_node1", detail)]
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let suites: [(&str, fn() -> Vec<Line>); 10] = [
        ("C1", c1),
        ("C2", c2),
        ("C3", c3),
        ("C4", c4),
        ("C5", c5),
        ("C6", c6),
        ("C7", c7),
        ("C8", c8),
        ("C9", c9),
        ("C10", c10),
    ];
    let mut failed = 0;
    let mut total = 0;
    for (id, suite) in suites {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let clock = Instant::now();
        let lines = suite();
        let secs = clock.elapsed().as_secs_f64();
        for l in lines {
            total += 1;
            if !l.pass {
                failed += 1;
            }
            let verdict = if l.pass { "PASS" } else { "FAIL" };
            let extra = if l.detail.is_empty() { String::new() } else { format!(" [{}]", l.detail) };
            let value = if l.value != 0.0 && l.value.abs() < 1e-3 {
                format!("{:.3e}", l.value)
            } else {
                format!("{:.6}", l.value)
            };
            println!("{verdict} {:<6} {}: {value} ({}){extra}", l.id, l.what, l.bound);
        }
        println!("       {id} took {secs:.1}s");
    }
    println!("acceptance: {} of {total} criteria pass", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
