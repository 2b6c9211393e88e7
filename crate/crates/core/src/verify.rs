//! Acceptance suite.
//!
//! Each check returns a [`CriterionReport`] carrying the measured value, the
//! target and the wall time against the check's runtime budget. Failures are
//! report entries, never errors.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::matching::{auction_match, is_epsilon_stable, optimal_assignment, Matching, Violation};
use crate::policy::{
    expected_cu_rate, expected_payoff, lp_oracle, random_discrete, sample_pair_distribution, solve_threshold,
    PayoffMatrix, RateDistribution, UNACCEPTABLE,
};
use crate::rng::SeedStream;
use crate::runner::{aggregate_csv, run_sweep, scenarios_csv, with_threads, SweepPoint};
use crate::sim::{generate_scenario, run_experiment, run_scenario, Scheme, SimConfig, Summary};
use crate::config::{ConfigFile, ExperimentSpec};
use crate::error::Result;

pub const POLICY_INSTANCES: usize = 100;
pub const MATCHING_INSTANCES: usize = 100;
pub const POLICY_TOL: f64 = 1e-9;
pub const SWEEP_N: [usize; 3] = [10, 20, 30];
pub const MIN_TREND_SCENARIOS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub target: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionReport {
    fn new(id: u8, name: &'static str, budget_s: u64) -> Self {
        CriterionReport {
            id,
            name,
            passed: false,
            measured: String::new(),
            target: String::new(),
            elapsed: Duration::ZERO,
            budget: Duration::from_secs(budget_s),
        }
    }

    fn finish(mut self, ok: bool, measured: String, target: String, elapsed: Duration) -> Self {
        self.passed = ok && elapsed <= self.budget;
        self.measured = measured;
        self.target = target;
        self.elapsed = elapsed;
        self
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {} ({}): {} | target {} | {:.2}s of {}s",
            self.status(),
            self.id,
            self.name,
            self.measured,
            self.target,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Report as CSV with a header line.
pub fn report_csv(reports: &[CriterionReport]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["id", "name", "status", "measured", "target", "elapsed_s", "budget_s"])?;
    for r in reports {
        w.write_record([
            r.id.to_string(),
            r.name.to_string(),
            r.status().to_string(),
            r.measured.clone(),
            r.target.clone(),
            format!("{:.3}", r.elapsed.as_secs_f64()),
            r.budget.as_secs().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Random policy instance: a discrete distribution with up to 10 states and a
/// requirement drawn up to 1.2 times the mean CU rate, so some are
/// infeasible.
pub fn random_policy_instance<R: Rng + ?Sized>(rng: &mut R) -> (RateDistribution, f64) {
    let dist = random_discrete(rng, 10, 5.0);
    let r_th = rng.random_range(0.0..1.2) * dist.mean_cu_rate();
    (dist, r_th)
}

/// Random payoff matrix with `M, N ≤ max_side`, entries uniform in
/// `[0, max_value)` and a share `p_unacceptable` of −1 entries.
pub fn random_payoffs<R: Rng + ?Sized>(
    rng: &mut R,
    max_side: usize,
    max_value: f64,
    p_unacceptable: f64,
) -> PayoffMatrix {
    let m = rng.random_range(1..=max_side);
    let n = rng.random_range(1..=max_side);
    let values = (0..m * n)
        .map(|_| {
            if rng.random_bool(p_unacceptable) {
                UNACCEPTABLE
            } else {
                rng.random_range(0.0..max_value)
            }
        })
        .collect();
    PayoffMatrix::new(m, n, values).expect("entries are valid")
}

/// The shared matching instances: alternating ε ∈ {0.1, 1}.
pub fn matching_instances(seed: u64) -> Vec<(PayoffMatrix, f64)> {
    let mut rng = SeedStream::new(seed).child(3).rng();
    (0..MATCHING_INSTANCES)
        .map(|i| {
            let eps = if i % 2 == 0 { 0.1 } else { 1.0 };
            (random_payoffs(&mut rng, 10, 10.0, 0.2), eps)
        })
        .collect()
}

pub fn policy_lp_equivalence(seed: u64) -> CriterionReport {
    let report = CriterionReport::new(1, "policy-LP oracle equivalence", 1);
    let start = Instant::now();
    let mut rng = SeedStream::new(seed).child(1).rng();
    let mut worst: f64 = 0.0;
    let mut agree = 0;
    for _ in 0..POLICY_INSTANCES {
        let (dist, r_th) = random_policy_instance(&mut rng);
        let Ok(policy) = solve_threshold(&dist, r_th) else { continue };
        match lp_oracle(&dist, r_th) {
            Ok(lp) if policy.feasible => {
                let gap = (expected_payoff(&policy, &dist) - lp).abs();
                worst = worst.max(gap);
                agree += usize::from(gap <= POLICY_TOL);
            }
            Err(_) if !policy.feasible => agree += 1,
            _ => {}
        }
    }
    report.finish(
        agree == POLICY_INSTANCES,
        format!("{agree}/{POLICY_INSTANCES} agree, max gap {worst:.3e}"),
        format!("{POLICY_INSTANCES}/{POLICY_INSTANCES} within {POLICY_TOL:e}"),
        start.elapsed(),
    )
}

/// Random instances plus empirical distributions sampled from placed pairs
/// at the configured requirement.
pub fn constraint_equality(seed: u64, base: &SimConfig) -> CriterionReport {
    let report = CriterionReport::new(2, "constraint equality", 1);
    let start = Instant::now();
    let root = SeedStream::new(seed).child(2);
    let mut rng = root.rng();
    let mut instances: Vec<(RateDistribution, f64)> =
        (0..POLICY_INSTANCES).map(|_| random_policy_instance(&mut rng)).collect();
    let config = SimConfig { n_cu: 4, n_d2d: 5, ..base.clone() };
    let geometry = generate_scenario(&config, &mut root.child(1).rng());
    for m in 0..config.n_cu {
        for n in 0..config.n_d2d {
            if let Ok(dist) = sample_pair_distribution(&geometry, &config.budget, m, n, 2000, &root.child(2)) {
                instances.push((dist, config.r_th));
            }
        }
    }
    let (mut feasible, mut exact, mut worst) = (0, 0, 0.0f64);
    for (dist, r_th) in &instances {
        let Ok(policy) = solve_threshold(dist, *r_th) else { continue };
        if !policy.feasible {
            continue;
        }
        feasible += 1;
        let err = (expected_cu_rate(&policy, dist) - r_th).abs();
        worst = worst.max(err);
        exact += usize::from(err <= POLICY_TOL);
    }
    report.finish(
        feasible > 0 && exact == feasible,
        format!("{exact}/{feasible} feasible instances exact, max error {worst:.3e}"),
        format!("all within {POLICY_TOL:e}"),
        start.elapsed(),
    )
}

fn auction_runs(seed: u64) -> Vec<(PayoffMatrix, f64, Option<Matching>)> {
    let root = SeedStream::new(seed).child(4);
    matching_instances(seed)
        .into_iter()
        .enumerate()
        .map(|(i, (v, eps))| {
            let phi = auction_match(&v, eps, &mut root.child(i as u64).rng()).ok();
            (v, eps, phi)
        })
        .collect()
}

pub fn stability_certification(seed: u64) -> CriterionReport {
    let report = CriterionReport::new(3, "epsilon-stability certification", 5);
    let start = Instant::now();
    let runs = auction_runs(seed);
    let stable = runs
        .iter()
        .filter(|(v, eps, phi)| phi.as_ref().is_some_and(|phi| is_epsilon_stable(phi, v, *eps).is_stable()))
        .count();
    report.finish(
        stable == MATCHING_INSTANCES,
        format!("{stable}/{MATCHING_INSTANCES} stable"),
        format!("{MATCHING_INSTANCES}/{MATCHING_INSTANCES}"),
        start.elapsed(),
    )
}

pub fn near_optimality(seed: u64) -> CriterionReport {
    let report = CriterionReport::new(4, "near-optimality bound", 5);
    let start = Instant::now();
    let runs = auction_runs(seed);
    let mut ok = 0;
    let mut worst_slack = f64::INFINITY;
    for (v, eps, phi) in &runs {
        let Some(phi) = phi else { continue };
        let (_, optimum) = optimal_assignment(v);
        let bound = optimum - v.rows().min(v.cols()) as f64 * eps;
        let slack = phi.total_payoff(v) - bound;
        worst_slack = worst_slack.min(slack);
        ok += usize::from(slack >= -1e-9);
    }
    report.finish(
        ok == MATCHING_INSTANCES,
        format!("{ok}/{MATCHING_INSTANCES} within bound, min slack {worst_slack:.4}"),
        "auction >= optimum - min(M,N)*eps on all".into(),
        start.elapsed(),
    )
}

/// Certifier self-check: the auction result on `[[4, 6]]` with ε = 1 is
/// stable, and dropping its price from 5 to 1 must be caught with (0, 0) as
/// the blocking pair.
pub fn fault_injection() -> (bool, Option<Violation>) {
    let v = PayoffMatrix::from_rows(&[vec![4.0, 6.0]]).expect("valid");
    let mut phi = auction_match(&v, 1.0, &mut SeedStream::new(0).rng()).expect("terminates");
    let clean = is_epsilon_stable(&phi, &v, 1.0).is_stable();
    phi.prices[0] = 1.0;
    let witness = is_epsilon_stable(&phi, &v, 1.0).witness();
    let caught = matches!(witness, Some(Violation::BlockingPair { cu: 0, d2d: 0, .. }));
    (clean && caught, witness)
}

/// The scheme-comparison sweep shared by the trend checks.
#[derive(Debug, Clone)]
pub struct TrendSweep {
    pub points: Vec<SweepPoint>,
    pub elapsed: Vec<Duration>,
}

impl TrendSweep {
    pub fn run(base: &SimConfig, scenarios: usize) -> Result<Self> {
        let mut points = Vec::new();
        let mut elapsed = Vec::new();
        for n in SWEEP_N {
            let start = Instant::now();
            let config = SimConfig { n_d2d: n, n_scenarios: scenarios, ..base.clone() };
            points.push(SweepPoint {
                n_d2d: n,
                result: run_experiment(&config, &Scheme::ALL)?,
            });
            elapsed.push(start.elapsed());
        }
        Ok(TrendSweep { points, elapsed })
    }

    fn index(&self, n: usize) -> usize {
        self.points.iter().position(|p| p.n_d2d == n).expect("sweep point present")
    }

    pub fn metric(&self, n: usize, scheme: Scheme, f: impl Fn(&crate::sim::Metrics) -> Summary) -> Summary {
        let p = &self.points[self.index(n)];
        f(p.result.metrics(scheme).expect("scheme evaluated"))
    }

    fn time_for(&self, ns: &[usize]) -> Duration {
        ns.iter().map(|&n| self.elapsed[self.index(n)]).sum()
    }

    /// Relative shortfall of the auction's mean D2D sum rate against the
    /// optimal scheme at each N.
    pub fn auction_gaps(&self) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .map(|p| {
                let rate = |s| p.result.metrics(s).expect("scheme evaluated").d2d_sum_rate.mean;
                let opt = rate(Scheme::Optimal);
                let gap = if opt > 0.0 { (opt - rate(Scheme::Auction)) / opt } else { 0.0 };
                (p.n_d2d, gap)
            })
            .collect()
    }

    fn scenarios(&self) -> usize {
        self.points.iter().map(|p| p.result.config.n_scenarios).min().unwrap_or(0)
    }
}

fn separation(a: Summary, b: Summary) -> f64 {
    let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    if se > 0.0 {
        (a.mean - b.mean) / se
    } else if a.mean > b.mean {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn utility_trend(sweep: &TrendSweep) -> CriterionReport {
    let report = CriterionReport::new(5, "EAU trend in N", 300);
    let cu = |n| sweep.metric(n, Scheme::Auction, |m| m.eau_cu);
    let d2d = |n| sweep.metric(n, Scheme::Auction, |m| m.eau_d2d);
    let cu_sep = separation(cu(30), cu(10));
    let d2d_sep = separation(d2d(10), d2d(30));
    let enough = sweep.scenarios() >= MIN_TREND_SCENARIOS;
    report.finish(
        enough && cu_sep >= 2.0 && d2d_sep >= 2.0,
        format!(
            "eau_cu {:.3} -> {:.3} ({cu_sep:.1} se), eau_d2d {:.3} -> {:.3} ({d2d_sep:.1} se), {} scenarios",
            cu(10).mean,
            cu(30).mean,
            d2d(10).mean,
            d2d(30).mean,
            sweep.scenarios()
        ),
        format!("both moves >= 2 se, >= {MIN_TREND_SCENARIOS} scenarios"),
        sweep.time_for(&[10, 30]),
    )
}

pub fn scheme_ordering(sweep: &TrendSweep) -> CriterionReport {
    let report = CriterionReport::new(6, "D2D sum rate ordering", 600);
    let mut ok = sweep.scenarios() >= MIN_TREND_SCENARIOS;
    let mut parts = Vec::new();
    for (n, gap) in sweep.auction_gaps() {
        let rate = |s| sweep.metric(n, s, |m| m.d2d_sum_rate).mean;
        let [auc, opt, nt, rnd] = Scheme::ALL.map(rate);
        ok &= opt >= auc && auc >= nt && nt >= rnd && gap <= 0.05;
        parts.push(format!(
            "N={n}: {opt:.2}/{auc:.2}/{nt:.2}/{rnd:.2} gap {:.2}%",
            100.0 * gap
        ));
    }
    report.finish(
        ok,
        parts.join("; "),
        "optimal >= auction >= no-transfer >= random, gap <= 5%".into(),
        sweep.time_for(&SWEEP_N),
    )
}

pub fn outage_levels(sweep: &TrendSweep) -> CriterionReport {
    let report = CriterionReport::new(7, "outage at N=20", 600);
    let out = |s| sweep.metric(20, s, |m| m.outage_fraction).mean;
    let realized = |s| sweep.metric(20, s, |m| m.realized_outage_fraction).mean;
    let (auction, random) = (out(Scheme::Auction), out(Scheme::Random));
    report.finish(
        sweep.scenarios() >= MIN_TREND_SCENARIOS && auction < 0.05 && random > 0.40,
        format!(
            "auction {:.2}%, random {:.2}% (frame-average: auction {:.1}%, random {:.1}%)",
            100.0 * auction,
            100.0 * random,
            100.0 * realized(Scheme::Auction),
            100.0 * realized(Scheme::Random)
        ),
        "auction < 5%, random > 40%".into(),
        sweep.time_for(&[20]),
    )
}

/// Small experiment used for the determinism check.
pub fn determinism_spec(seed: u64) -> ExperimentSpec {
    ConfigFile {
        n_cu: 6,
        n_d2d: vec![4, 8],
        samples_per_pair: 500,
        subframes: 200,
        scenarios: 12,
        seed,
        ..ConfigFile::default()
    }
    .resolve()
    .expect("valid config")
}

fn render(spec: &ExperimentSpec, threads: usize) -> Result<[Vec<u8>; 3]> {
    let points = with_threads(Some(threads), || run_sweep(spec))??;
    Ok([aggregate_csv(&points)?, scenarios_csv(&points)?, spec.resolved_toml().into_bytes()])
}

pub fn determinism(seed: u64) -> CriterionReport {
    let report = CriterionReport::new(8, "determinism", 60);
    let start = Instant::now();
    let spec = determinism_spec(seed);
    let runs: Vec<Result<[Vec<u8>; 3]>> = [1, 4, 1].iter().map(|&t| render(&spec, t)).collect();
    let (ok, measured) = match runs.as_slice() {
        [Ok(a), Ok(b), Ok(c)] => {
            let same = a == b && a == c;
            (same, format!("3 runs (1, 4, 1 threads) {}", if same { "byte-identical" } else { "differ" }))
        }
        _ => (false, "run failed".to_string()),
    };
    report.finish(ok, measured, "byte-identical outputs".into(), start.elapsed())
}

/// Mean realized rate of matched CUs against `r_th` on evaluation fading,
/// with the standard error taken over matched CUs.
pub fn realized_rate_consistency(base: &SimConfig, scenarios: usize) -> CriterionReport {
    let report = CriterionReport::new(9, "realized-rate consistency", 120);
    let start = Instant::now();
    let config = SimConfig { n_d2d: 20, subframes: 10_000, n_scenarios: scenarios, ..base.clone() };
    let outcomes: Result<Vec<_>> = (0..scenarios)
        .into_par_iter()
        .map(|i| run_scenario(&config, i, &[Scheme::Auction]))
        .collect();
    let (ok, measured) = match outcomes {
        Ok(outcomes) => {
            let rates: Vec<f64> = outcomes
                .iter()
                .flat_map(|o| {
                    let f = &o[0].frame;
                    f.matching.pairs().map(|(m, _)| f.realized_cu_rate[m]).collect::<Vec<_>>()
                })
                .collect();
            let s = Summary::of(&rates);
            let z = if s.std_err > 0.0 { (s.mean - config.r_th) / s.std_err } else { f64::INFINITY };
            (
                rates.len() > 1 && z.abs() <= 3.0,
                format!(
                    "mean {:.4} vs r_th {:.4} nats, se {:.4}, z {z:.2}, {} matched CUs",
                    s.mean,
                    config.r_th,
                    s.std_err,
                    rates.len()
                ),
            )
        }
        Err(e) => (false, format!("run failed: {e}")),
    };
    report.finish(ok, measured, "|z| <= 3".into(), start.elapsed())
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub base: SimConfig,
    /// Scenarios per sweep point for the trend checks.
    pub trend_scenarios: usize,
    pub consistency_scenarios: usize,
}

impl VerifyOptions {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        VerifyOptions {
            seed: spec.seed(),
            base: spec.base.clone(),
            trend_scenarios: spec.base.n_scenarios.max(MIN_TREND_SCENARIOS),
            consistency_scenarios: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionReport>,
    pub auction_gaps: Vec<(usize, f64)>,
    pub fault_injection_caught: bool,
    pub fault_witness: Option<Violation>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.fault_injection_caught && self.criteria.iter().all(|c| c.passed)
    }
}

pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    let mut criteria = vec![
        policy_lp_equivalence(opts.seed),
        constraint_equality(opts.seed, &opts.base),
        stability_certification(opts.seed),
        near_optimality(opts.seed),
    ];
    let mut auction_gaps = Vec::new();
    match TrendSweep::run(&opts.base, opts.trend_scenarios) {
        Ok(sweep) => {
            criteria.push(utility_trend(&sweep));
            criteria.push(scheme_ordering(&sweep));
            criteria.push(outage_levels(&sweep));
            auction_gaps = sweep.auction_gaps();
        }
        Err(e) => {
            for (id, name) in [(5, "EAU trend in N"), (6, "D2D sum rate ordering"), (7, "outage at N=20")] {
                criteria.push(CriterionReport::new(id, name, 0).finish(
                    false,
                    format!("sweep failed: {e}"),
                    String::new(),
                    Duration::ZERO,
                ));
            }
        }
    }
    criteria.push(determinism(opts.seed));
    criteria.push(realized_rate_consistency(&opts.base, opts.consistency_scenarios));
    let (fault_injection_caught, fault_witness) = fault_injection();
    VerifyReport {
        criteria,
        auction_gaps,
        fault_injection_caught,
        fault_witness,
    }
}
