//! Monte Carlo harness for the two-timescale scheme.
//!
//! A scenario places the nodes, estimates the long-term payoff and policy of
//! every (CU, D2D pair) combination from training draws, pairs users with one
//! of the [`Scheme`]s and finally plays one frame of `subframes` subframes on
//! fresh fading. Every random draw comes from a stream addressed by
//! (master seed, M, N, scenario index, purpose, ...), so results do not depend
//! on how scenarios or pairs are spread over worker threads.
//!
//! Rates are in nats/s/Hz throughout.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    cellular_rate, path_gain, sample_fading, Geometry, LinkBudget, PlacementBounds, Point, RatePair,
};
use crate::error::{Error, Result};
use crate::matching::{
    auction_match, match_without_transfer, optimal_assignment, random_match, utilities, Matching,
    Utilities,
};
use crate::policy::{estimate_pairs, CooperationPolicy, PairTable, PayoffMatrix};
use crate::rng::SeedStream;

/// Rate requirement of the reference configuration, in bit/s/Hz.
pub const DEFAULT_R_TH_BITS: f64 = 1.8;

/// Planned CU rates this close below `r_th` still count as served; the
/// threshold policy meets the requirement with equality up to rounding.
pub const OUTAGE_TOL: f64 = 1e-9;

pub fn bits_to_nats(rate: f64) -> f64 {
    rate * LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_cu: usize,
    pub n_d2d: usize,
    /// Meters.
    pub cell_radius: f64,
    /// DT distance range from the BS, meters.
    pub dt_annulus: (f64, f64),
    /// DT–DR distance range, meters.
    pub d2d_distance: (f64, f64),
    pub pathloss_exponent: f64,
    pub budget: LinkBudget,
    /// CU rate requirement, nats/s/Hz.
    pub r_th: f64,
    /// Auction price step.
    pub epsilon: f64,
    /// Subframes per frame.
    pub subframes: usize,
    pub samples_per_pair: usize,
    pub n_scenarios: usize,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cu: 15,
            n_d2d: 20,
            cell_radius: 500.0,
            dt_annulus: (200.0, 400.0),
            d2d_distance: (10.0, 30.0),
            pathloss_exponent: 4.0,
            budget: LinkBudget::from_mw_dbm(20.0, 20.0, -100.0).expect("positive budget"),
            r_th: bits_to_nats(DEFAULT_R_TH_BITS),
            epsilon: 1.0,
            subframes: 1000,
            samples_per_pair: 10_000,
            n_scenarios: 200,
            master_seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("cell_radius", self.cell_radius)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        positive("epsilon", self.epsilon)?;
        positive("p_cu", self.budget.p_cu)?;
        positive("p_dt", self.budget.p_dt)?;
        positive("noise", self.budget.noise)?;
        for (key, (lo, hi)) in [("dt_annulus", self.dt_annulus), ("d2d_distance", self.d2d_distance)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(key, format!("range [{lo}, {hi}] must be positive and ordered")));
            }
        }
        if !(self.r_th >= 0.0 && self.r_th.is_finite()) {
            return Err(Error::invalid("r_th", format!("must be nonnegative, got {}", self.r_th)));
        }
        if self.subframes == 0 {
            return Err(Error::invalid("subframes", "must be at least 1"));
        }
        if self.samples_per_pair == 0 {
            return Err(Error::invalid("samples_per_pair", "must be at least 1"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> PlacementBounds {
        PlacementBounds {
            dt_annulus: self.dt_annulus,
            d2d_distance: self.d2d_distance,
        }
    }

    /// Root stream of scenario `index` at this configuration's (M, N).
    pub fn scenario_stream(&self, index: usize) -> SeedStream {
        SeedStream::new(self.master_seed)
            .child(self.n_cu as u64)
            .child(self.n_d2d as u64)
            .child(index as u64)
    }
}

/// Place the BS at the origin, CUs uniformly on the cell edge, DTs uniformly
/// by area in the annulus and each DR at a uniform angle and distance around
/// its DT.
pub fn generate_scenario<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Geometry {
    let cu_positions = (0..config.n_cu)
        .map(|_| Point::polar(config.cell_radius, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let (r_lo, r_hi) = config.dt_annulus;
    let (d_lo, d_hi) = config.d2d_distance;
    let mut dt_positions = Vec::with_capacity(config.n_d2d);
    let mut dr_positions = Vec::with_capacity(config.n_d2d);
    for _ in 0..config.n_d2d {
        let radius = rng.random_range(r_lo * r_lo..=r_hi * r_hi).sqrt();
        let dt = Point::polar(radius, rng.random_range(0.0..2.0 * PI));
        let spacing = rng.random_range(d_lo..=d_hi);
        let offset = Point::polar(spacing, rng.random_range(0.0..2.0 * PI));
        dt_positions.push(dt);
        dr_positions.push(Point::new(dt.x + offset.x, dt.y + offset.y));
    }
    Geometry {
        bs_position: Point::ORIGIN,
        cu_positions,
        dt_positions,
        dr_positions,
        cell_radius: config.cell_radius,
        pathloss_exponent: config.pathloss_exponent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Auction,
    Optimal,
    NoTransfer,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Auction, Scheme::Optimal, Scheme::NoTransfer, Scheme::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Auction => "auction",
            Scheme::Optimal => "optimal",
            Scheme::NoTransfer => "no-transfer",
            Scheme::Random => "random",
        }
    }

    fn stream_key(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auction" => Ok(Scheme::Auction),
            "optimal" => Ok(Scheme::Optimal),
            "no-transfer" => Ok(Scheme::NoTransfer),
            "random" => Ok(Scheme::Random),
            other => Err(Error::invalid("schemes", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Pair users with `scheme`.
pub fn pair_users<R: Rng + ?Sized>(
    scheme: Scheme,
    payoffs: &PayoffMatrix,
    epsilon: f64,
    rng: &mut R,
) -> Result<Matching> {
    Ok(match scheme {
        Scheme::Auction => auction_match(payoffs, epsilon, rng)?,
        Scheme::Optimal => optimal_assignment(payoffs).0,
        Scheme::NoTransfer => match_without_transfer(payoffs, rng),
        Scheme::Random => random_match(payoffs.rows(), payoffs.cols(), rng),
    })
}

// stream tags below a scenario root
const GEOMETRY: u64 = 1;
const PAYOFF: u64 = 2;
const DIRECT: u64 = 3;
const FRAME: u64 = 4;
const PAIRING: u64 = 5;
const UNMATCHED: u64 = u64::MAX;

/// A placed scenario with its pair estimates.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub index: usize,
    pub geometry: Geometry,
    pub budget: LinkBudget,
    pub pairs: PairTable,
    pub payoffs: PayoffMatrix,
    /// Mean direct-link rate of each CU, from its own training draws.
    pub direct_cu_rate: Vec<f64>,
    pub streams: SeedStream,
}

impl Scenario {
    /// Build from an explicit geometry; payoffs are estimated on the streams
    /// below `streams`.
    pub fn from_geometry(
        index: usize,
        geometry: Geometry,
        config: &SimConfig,
        streams: SeedStream,
    ) -> Result<Self> {
        let pairs = estimate_pairs(
            &geometry,
            &config.budget,
            config.r_th,
            config.samples_per_pair,
            &streams.child(PAYOFF),
        )?;
        let direct_cu_rate = (0..geometry.n_cu())
            .map(|m| {
                let d = geometry.cu_bs_distance(m);
                let mut rng = streams.child(DIRECT).child(m as u64).rng();
                let mut sum = 0.0;
                for _ in 0..config.samples_per_pair {
                    let h = path_gain(d, geometry.pathloss_exponent, sample_fading(&mut rng))?;
                    sum += cellular_rate(h, &config.budget);
                }
                Ok(sum / config.samples_per_pair as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            index,
            geometry,
            budget: config.budget,
            payoffs: pairs.payoff_matrix(),
            pairs,
            direct_cu_rate,
            streams,
        })
    }

    /// Evaluation stream of CU `m` in a frame; `d2d` is its partner if any.
    pub fn frame_stream(&self, m: usize, d2d: Option<usize>) -> SeedStream {
        let cu = self.streams.child(FRAME).child(m as u64);
        cu.child(d2d.map_or(UNMATCHED, |n| n as u64))
    }

    /// Policies of the matched pairs, indexed by CU.
    pub fn policies_for(&self, matching: &Matching) -> Vec<Option<CooperationPolicy>> {
        matching
            .mu_cu
            .iter()
            .enumerate()
            .map(|(m, n)| n.map(|n| self.pairs.get(m, n).policy))
            .collect()
    }

    /// Long-term CU rates implied by the pairing: the policy's expected rate
    /// for matched CUs, the mean direct rate otherwise.
    pub fn planned_cu_rates(&self, matching: &Matching) -> Vec<f64> {
        matching
            .mu_cu
            .iter()
            .enumerate()
            .map(|(m, n)| match n {
                Some(n) => self.pairs.get(m, *n).cu_rate,
                None => self.direct_cu_rate[m],
            })
            .collect()
    }
}

pub fn prepare_scenario(config: &SimConfig, index: usize) -> Result<Scenario> {
    let streams = config.scenario_stream(index);
    let geometry = generate_scenario(config, &mut streams.child(GEOMETRY).rng());
    Scenario::from_geometry(index, geometry, config, streams)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    /// Frame-average rate of each CU.
    pub realized_cu_rate: Vec<f64>,
    /// Frame-average rate of each D2D pair.
    pub realized_d2d_rate: Vec<f64>,
    pub matching: Matching,
    pub utilities: Utilities,
}

/// What happened on one CU's channel in one subframe. Unmatched CUs report
/// their direct rate as `rates.r_cu` and no D2D rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubframeRecord {
    pub subframe: usize,
    pub cu: usize,
    pub d2d: Option<usize>,
    pub rates: RatePair,
    /// D2D share of the subframe.
    pub alpha: f64,
}

/// Play one frame on fresh fading.
///
/// Matched pairs follow their policy every subframe; an infeasible policy
/// leaves every subframe to the CU. Unmatched CUs use their direct link for
/// the whole subframe and unmatched D2D pairs get nothing.
pub fn run_frame(
    scenario: &Scenario,
    matching: &Matching,
    policies: &[Option<CooperationPolicy>],
    config: &SimConfig,
) -> Result<FrameResult> {
    run_frame_inner(scenario, matching, policies, config, None)
}

/// [`run_frame`] that also logs every subframe.
pub fn run_frame_logged(
    scenario: &Scenario,
    matching: &Matching,
    policies: &[Option<CooperationPolicy>],
    config: &SimConfig,
    log: &mut Vec<SubframeRecord>,
) -> Result<FrameResult> {
    run_frame_inner(scenario, matching, policies, config, Some(log))
}

fn run_frame_inner(
    scenario: &Scenario,
    matching: &Matching,
    policies: &[Option<CooperationPolicy>],
    config: &SimConfig,
    mut log: Option<&mut Vec<SubframeRecord>>,
) -> Result<FrameResult> {
    let geometry = &scenario.geometry;
    if matching.n_cu() != geometry.n_cu() || matching.n_d2d() != geometry.n_d2d() {
        return Err(Error::usage("matching does not fit the scenario"));
    }
    if policies.len() != geometry.n_cu() {
        return Err(Error::usage("one policy slot per CU required"));
    }
    let budget = &scenario.budget;
    let t_s = config.subframes;
    if t_s == 0 {
        return Err(Error::usage("a frame needs at least one subframe"));
    }
    let mut cu_rate = vec![0.0; geometry.n_cu()];
    let mut d2d_rate = vec![0.0; geometry.n_d2d()];

    for (m, partner) in matching.mu_cu.iter().enumerate() {
        let mut rng = scenario.frame_stream(m, *partner).rng();
        match partner {
            Some(n) => {
                let policy = policies[m]
                    .ok_or_else(|| Error::usage(format!("no policy for matched pair ({m}, {n})")))?;
                let links = geometry.pair_links(m, *n)?;
                let (mut cu_sum, mut d2d_sum) = (0.0, 0.0);
                for subframe in 0..t_s {
                    let rates = links.sample_draw(&mut rng).rates(budget);
                    let alpha = policy.share(&rates);
                    cu_sum += (1.0 - alpha) * rates.r_cu;
                    d2d_sum += alpha * rates.r_d2d;
                    if let Some(log) = log.as_deref_mut() {
                        log.push(SubframeRecord { subframe, cu: m, d2d: Some(*n), rates, alpha });
                    }
                }
                cu_rate[m] = cu_sum / t_s as f64;
                d2d_rate[*n] = d2d_sum / t_s as f64;
            }
            None => {
                let d = geometry.cu_bs_distance(m);
                let mut sum = 0.0;
                for subframe in 0..t_s {
                    let h = path_gain(d, geometry.pathloss_exponent, sample_fading(&mut rng))?;
                    let r = cellular_rate(h, budget);
                    sum += r;
                    if let Some(log) = log.as_deref_mut() {
                        log.push(SubframeRecord {
                            subframe,
                            cu: m,
                            d2d: None,
                            rates: RatePair::new(r, 0.0),
                            alpha: 0.0,
                        });
                    }
                }
                cu_rate[m] = sum / t_s as f64;
            }
        }
    }
    Ok(FrameResult {
        realized_cu_rate: cu_rate,
        realized_d2d_rate: d2d_rate,
        matching: matching.clone(),
        utilities: utilities(matching, &scenario.payoffs),
    })
}

/// Effective average utilities `(CU, D2D)`: utility sums over matched users
/// divided by the number of matched users, 0 when nobody is matched.
pub fn compute_eau(utilities: &Utilities, matching: &Matching) -> (f64, f64) {
    let average = |values: &mut dyn Iterator<Item = f64>| {
        let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    let eau_cu = average(&mut matching.pairs().map(|(m, _)| utilities.theta[m]));
    let eau_d2d = average(&mut matching.pairs().map(|(_, n)| utilities.delta[n]));
    (eau_cu, eau_d2d)
}

/// Fraction of rates falling short of `r_th` (by more than [`OUTAGE_TOL`]).
pub fn outage_fraction(rates: &[f64], r_th: f64) -> f64 {
    if rates.is_empty() {
        return 0.0;
    }
    let short = rates.iter().filter(|&&r| r < r_th - OUTAGE_TOL).count();
    short as f64 / rates.len() as f64
}

/// Fraction of (CU, frame) pairs whose realized frame-average rate is below
/// `r_th`.
pub fn outage_percentage(frames: &[FrameResult], r_th: f64) -> f64 {
    let rates: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.realized_cu_rate.iter().copied())
        .collect();
    outage_fraction(&rates, r_th)
}

/// Per-scenario, per-scheme figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub eau_cu: f64,
    pub eau_d2d: f64,
    /// Sum of realized D2D frame rates.
    pub d2d_sum_rate: f64,
    /// Sum of long-term payoffs of acceptable matched pairs.
    pub total_payoff: f64,
    /// Share of CUs whose planned long-term rate misses `r_th`.
    pub outage_fraction: f64,
    /// Share of CUs whose realized frame rate is below `r_th`.
    pub realized_outage_fraction: f64,
    pub matched_cus: usize,
    pub matched_d2d: usize,
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub frame: FrameResult,
    pub planned_cu_rate: Vec<f64>,
    pub metrics: ScenarioMetrics,
}

pub fn evaluate_scheme(scenario: &Scenario, config: &SimConfig, scheme: Scheme) -> Result<SchemeOutcome> {
    let mut rng = scenario.streams.child(PAIRING).child(scheme.stream_key()).rng();
    let matching = pair_users(scheme, &scenario.payoffs, config.epsilon, &mut rng)?;
    let policies = scenario.policies_for(&matching);
    let frame = run_frame(scenario, &matching, &policies, config)?;
    let planned_cu_rate = scenario.planned_cu_rates(&matching);
    let (eau_cu, eau_d2d) = compute_eau(&frame.utilities, &matching);
    let total_payoff = matching
        .pairs()
        .map(|(m, n)| scenario.payoffs.get(m, n).max(0.0))
        .sum();
    let metrics = ScenarioMetrics {
        eau_cu,
        eau_d2d,
        d2d_sum_rate: frame.realized_d2d_rate.iter().sum(),
        total_payoff,
        outage_fraction: outage_fraction(&planned_cu_rate, config.r_th),
        realized_outage_fraction: outage_fraction(&frame.realized_cu_rate, config.r_th),
        matched_cus: matching.matched_count(),
        matched_d2d: matching.matched_count(),
    };
    Ok(SchemeOutcome {
        scheme,
        frame,
        planned_cu_rate,
        metrics,
    })
}

/// Prepare scenario `index` and evaluate every scheme on it. All schemes see
/// the same geometry, payoffs and per-pair evaluation fading.
pub fn run_scenario(config: &SimConfig, index: usize, schemes: &[Scheme]) -> Result<Vec<SchemeOutcome>> {
    let scenario = prepare_scenario(config, index)?;
    schemes
        .iter()
        .map(|&s| evaluate_scheme(&scenario, config, s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Summary { mean, std_err: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Summary {
            mean,
            std_err: (var / n as f64).sqrt(),
        }
    }
}

/// Scenario averages for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub scenarios: usize,
    pub eau_cu: Summary,
    pub eau_d2d: Summary,
    pub d2d_sum_rate: Summary,
    pub total_payoff: Summary,
    pub outage_fraction: Summary,
    pub realized_outage_fraction: Summary,
    pub matched_cus: Summary,
    pub matched_d2d: Summary,
}

impl Metrics {
    pub fn aggregate(rows: &[ScenarioMetrics]) -> Self {
        let field = |f: fn(&ScenarioMetrics) -> f64| Summary::of(&rows.iter().map(f).collect::<Vec<_>>());
        Metrics {
            scenarios: rows.len(),
            eau_cu: field(|r| r.eau_cu),
            eau_d2d: field(|r| r.eau_d2d),
            d2d_sum_rate: field(|r| r.d2d_sum_rate),
            total_payoff: field(|r| r.total_payoff),
            outage_fraction: field(|r| r.outage_fraction),
            realized_outage_fraction: field(|r| r.realized_outage_fraction),
            matched_cus: field(|r| r.matched_cus as f64),
            matched_d2d: field(|r| r.matched_d2d as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: usize,
    pub scheme: Scheme,
    pub metrics: ScenarioMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: SimConfig,
    pub rows: Vec<ScenarioRow>,
    pub aggregate: Vec<(Scheme, Metrics)>,
}

impl ExperimentResult {
    pub fn metrics(&self, scheme: Scheme) -> Option<&Metrics> {
        self.aggregate.iter().find(|(s, _)| *s == scheme).map(|(_, m)| m)
    }

    pub fn rows_for(&self, scheme: Scheme) -> impl Iterator<Item = &ScenarioRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }
}

/// Run `config.n_scenarios` scenarios, each evaluated under every scheme.
/// Scenarios run in parallel; rows come back in (scenario, scheme) order.
pub fn run_experiment(config: &SimConfig, schemes: &[Scheme]) -> Result<ExperimentResult> {
    config.validate()?;
    if schemes.is_empty() {
        return Err(Error::invalid("schemes", "at least one scheme required"));
    }
    let outcomes = (0..config.n_scenarios)
        .into_par_iter()
        .map(|i| run_scenario(config, i, schemes))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ScenarioRow> = outcomes
        .iter()
        .enumerate()
        .flat_map(|(i, per_scheme)| {
            per_scheme.iter().map(move |o| ScenarioRow {
                scenario: i,
                scheme: o.scheme,
                metrics: o.metrics,
            })
        })
        .collect();
    let aggregate = schemes
        .iter()
        .map(|&s| {
            let per: Vec<ScenarioMetrics> = rows.iter().filter(|r| r.scheme == s).map(|r| r.metrics).collect();
            (s, Metrics::aggregate(&per))
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        rows,
        aggregate,
    })
}
