//! Per-pair time-sharing policy and long-term payoffs.
//!
//! For a fixed pairing of CU `m` with D2D pair `n`, the policy maps every
//! state `(r_cu, r_d2d)` to the D2D share `α ∈ [0, 1]` of a subframe. It
//! maximizes the D2D pair's expected rate `E{α r_d2d}` while the CU keeps an
//! expected rate `E{(1 − α) r_cu}` of at least `r_th`. The optimum is a
//! threshold rule on `r_d2d / r_cu`: states below the threshold `λ*` stay
//! cellular, states above go to the D2D link, and states exactly on it are
//! split so that the CU constraint holds with equality.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_rate_pair, Geometry, LinkBudget, RatePair};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Relative tolerance when deciding whether a state lies on the threshold.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Relative tolerance on `λ` for the bisection search. Tighter than
/// [`BOUNDARY_TOL`] so that a state sitting exactly on the threshold still
/// classifies as a boundary state at the bisected `λ`.
pub const BISECTION_TOL: f64 = 1e-13;

/// Payoff marking a pair whose CU constraint cannot be met.
pub const UNACCEPTABLE: f64 = -1.0;

/// Distribution of the per-subframe state of one pair.
#[derive(Debug, Clone, PartialEq)]
pub enum RateDistribution {
    /// Finite support with explicit probabilities.
    Discrete(Vec<(RatePair, f64)>),
    /// Equally weighted samples.
    Empirical(Vec<RatePair>),
}

const PROB_SUM_TOL: f64 = 1e-9;

fn check_rates(s: &RatePair) -> Result<()> {
    if s.r_cu >= 0.0 && s.r_d2d >= 0.0 && s.r_cu.is_finite() && s.r_d2d.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rates must be finite and nonnegative, got {s:?}")))
    }
}

impl RateDistribution {
    pub fn discrete(support: Vec<(RatePair, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::domain("empty distribution"));
        }
        let mut total = 0.0;
        for (s, p) in &support {
            check_rates(s)?;
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(Error::domain(format!("invalid probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::domain(format!("probabilities sum to {total}")));
        }
        Ok(RateDistribution::Discrete(support))
    }

    pub fn empirical(samples: Vec<RatePair>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("empty distribution"));
        }
        samples.iter().try_for_each(check_rates)?;
        Ok(RateDistribution::Empirical(samples))
    }

    pub fn len(&self) -> usize {
        match self {
            RateDistribution::Discrete(s) => s.len(),
            RateDistribution::Empirical(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// States with their probability weights.
    pub fn weighted(&self) -> Box<dyn Iterator<Item = (RatePair, f64)> + '_> {
        match self {
            RateDistribution::Discrete(s) => Box::new(s.iter().copied()),
            RateDistribution::Empirical(s) => {
                let w = 1.0 / s.len() as f64;
                Box::new(s.iter().map(move |r| (*r, w)))
            }
        }
    }

    pub fn expectation(&self, f: impl Fn(&RatePair) -> f64) -> f64 {
        match self {
            RateDistribution::Discrete(s) => s.iter().map(|(r, p)| p * f(r)).sum(),
            RateDistribution::Empirical(s) => s.iter().map(f).sum::<f64>() / s.len() as f64,
        }
    }

    pub fn mean_cu_rate(&self) -> f64 {
        self.expectation(|s| s.r_cu)
    }

    pub fn mean_d2d_rate(&self) -> f64 {
        self.expectation(|s| s.r_d2d)
    }
}

/// Where a state falls relative to the threshold `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `λ r_cu > r_d2d`: the whole subframe serves the CU.
    Cellular,
    /// `λ r_cu = r_d2d` within [`BOUNDARY_TOL`].
    Boundary,
    /// `λ r_cu < r_d2d`: the whole subframe goes to the D2D link.
    D2d,
}

pub fn classify(lambda: f64, state: &RatePair) -> Side {
    let lhs = lambda * state.r_cu;
    let rhs = state.r_d2d;
    if (lhs - rhs).abs() <= BOUNDARY_TOL * lhs.abs().max(rhs.abs()) {
        Side::Boundary
    } else if lhs > rhs {
        Side::Cellular
    } else {
        Side::D2d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperationPolicy {
    pub lambda_star: f64,
    /// D2D share applied to states on the threshold.
    pub alpha_boundary: f64,
    pub feasible: bool,
}

impl CooperationPolicy {
    pub fn infeasible() -> Self {
        CooperationPolicy {
            lambda_star: 0.0,
            alpha_boundary: 0.0,
            feasible: false,
        }
    }

    /// D2D share for `state`; infeasible policies leave the subframe to the CU.
    pub fn share(&self, state: &RatePair) -> f64 {
        if !self.feasible {
            return 0.0;
        }
        match classify(self.lambda_star, state) {
            Side::Cellular => 0.0,
            Side::Boundary => self.alpha_boundary,
            Side::D2d => 1.0,
        }
    }
}

/// D2D time allocation factor chosen by a feasible policy.
pub fn apply_policy(policy: &CooperationPolicy, state: &RatePair) -> Result<f64> {
    if !policy.feasible {
        return Err(Error::usage("cannot apply an infeasible cooperation policy"));
    }
    Ok(policy.share(state))
}

pub fn check_feasibility(dist: &RateDistribution, r_th: f64) -> bool {
    dist.mean_cu_rate() >= r_th
}

/// `E{r_cu · 1(λ r_cu ≥ r_d2d)}`, nondecreasing and right-continuous in `λ`.
/// Boundary states count as on the threshold, as in [`classify`].
pub fn dual_statistic(dist: &RateDistribution, lambda: f64) -> f64 {
    dist.expectation(|s| match classify(lambda, s) {
        Side::D2d => 0.0,
        Side::Cellular | Side::Boundary => s.r_cu,
    })
}

fn check_threshold(r_th: f64) -> Result<()> {
    if r_th.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rate requirement must be finite, got {r_th}")))
    }
}

/// Exact optimal threshold policy.
///
/// The dual statistic only jumps at the candidate ratios `r_d2d / r_cu`, so
/// `λ*` is found by sorting the candidates and scanning prefix sums of the
/// CU rate mass. States with `r_cu = 0` have an infinite ratio and never
/// count towards the constraint.
pub fn solve_threshold(dist: &RateDistribution, r_th: f64) -> Result<CooperationPolicy> {
    check_threshold(r_th)?;
    if dist.is_empty() {
        return Err(Error::domain("empty distribution"));
    }
    if !check_feasibility(dist, r_th) {
        return Ok(CooperationPolicy::infeasible());
    }
    let lambda = if r_th <= 0.0 {
        0.0
    } else {
        let mut candidates: Vec<(f64, f64)> = dist
            .weighted()
            .filter(|(s, w)| s.r_cu > 0.0 && *w > 0.0)
            .map(|(s, w)| (s.r_d2d / s.r_cu, w * s.r_cu))
            .collect();
        candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut mass = 0.0;
        let mut lambda = candidates.last().map_or(0.0, |c| c.0);
        for (ratio, m) in &candidates {
            mass += m;
            if mass >= r_th {
                lambda = *ratio;
                break;
            }
        }
        lambda
    };
    Ok(policy_at(dist, lambda, r_th))
}

/// Policy for a given threshold, with the boundary share set so that the CU
/// constraint holds with equality.
pub fn policy_at(dist: &RateDistribution, lambda: f64, r_th: f64) -> CooperationPolicy {
    let mut strict = 0.0;
    let mut boundary = 0.0;
    for (s, w) in dist.weighted() {
        match classify(lambda, &s) {
            Side::Cellular => strict += w * s.r_cu,
            Side::Boundary => boundary += w * s.r_cu,
            Side::D2d => {}
        }
    }
    let alpha_boundary = if boundary > 0.0 {
        (1.0 - (r_th - strict) / boundary).clamp(0.0, 1.0)
    } else {
        0.0
    };
    CooperationPolicy {
        lambda_star: lambda,
        alpha_boundary,
        feasible: true,
    }
}

/// Smallest `λ ≥ 0` with `statistic(λ) ≥ r_th`, by bisection.
///
/// For distributions without finite support, where the candidate scan of
/// [`solve_threshold`] does not apply. `statistic` must be nondecreasing and
/// eventually reach `r_th`.
pub fn bisect_threshold(statistic: impl Fn(f64) -> f64, r_th: f64, tol: f64) -> Result<f64> {
    check_threshold(r_th)?;
    if statistic(0.0) >= r_th {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while statistic(hi) < r_th {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::domain("threshold statistic never reaches the requirement"));
        }
    }
    for _ in 0..400 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if statistic(mid) >= r_th {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Threshold policy found by bisection over `λ`.
pub fn solve_threshold_bisection(dist: &RateDistribution, r_th: f64) -> Result<CooperationPolicy> {
    check_threshold(r_th)?;
    if !check_feasibility(dist, r_th) {
        return Ok(CooperationPolicy::infeasible());
    }
    let lambda = bisect_threshold(|l| dual_statistic(dist, l), r_th, BISECTION_TOL)?;
    Ok(policy_at(dist, lambda, r_th))
}

/// Long-term D2D payoff `E{π(r) r_d2d}`, or [`UNACCEPTABLE`] when infeasible.
pub fn expected_payoff(policy: &CooperationPolicy, dist: &RateDistribution) -> f64 {
    if !policy.feasible {
        return UNACCEPTABLE;
    }
    dist.expectation(|s| policy.share(s) * s.r_d2d)
}

/// Long-term CU rate `E{(1 − π(r)) r_cu}` under the policy.
pub fn expected_cu_rate(policy: &CooperationPolicy, dist: &RateDistribution) -> f64 {
    dist.expectation(|s| (1.0 - policy.share(s)) * s.r_cu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("rate requirement exceeds the CU's mean rate")]
pub struct LpInfeasible;

/// Optimal value of the policy problem as a linear program over per-state
/// shares, solved greedily from the D2D side.
///
/// Handing state `k` to the D2D link costs `p_k r_cu` of the CU's slack
/// `E{r_cu} − r_th` and gains `p_k r_d2d`, which is a fractional knapsack:
/// taking states by decreasing `r_d2d / r_cu` and splitting the last one is
/// exact. Independent of [`solve_threshold`] and used to check it.
pub fn lp_oracle(dist: &RateDistribution, r_th: f64) -> std::result::Result<f64, LpInfeasible> {
    let mut budget = dist.mean_cu_rate() - r_th;
    if budget < 0.0 {
        return Err(LpInfeasible);
    }
    let mut items: Vec<(f64, f64, f64)> = dist
        .weighted()
        .map(|(s, w)| {
            let (cost, gain) = (w * s.r_cu, w * s.r_d2d);
            let ratio = if cost > 0.0 { gain / cost } else { f64::INFINITY };
            (ratio, cost, gain)
        })
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut value = 0.0;
    for (_, cost, gain) in items {
        if cost <= budget {
            budget -= cost;
            value += gain;
        } else {
            value += gain * budget / cost;
            budget = 0.0;
        }
    }
    Ok(value)
}

/// Long-term payoffs `v_mn` for every (CU, D2D pair) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::domain(format!(
                "{} values for a {rows}x{cols} payoff matrix",
                values.len()
            )));
        }
        for v in &values {
            if !(v.is_finite() && (*v >= 0.0 || *v == UNACCEPTABLE)) {
                return Err(Error::domain(format!("payoff {v} is neither >= 0 nor -1")));
            }
        }
        Ok(PayoffMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged payoff rows"));
        }
        PayoffMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        PayoffMatrix {
            rows,
            cols,
            values: vec![UNACCEPTABLE; rows * cols],
        }
    }

    /// Number of CUs.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of D2D pairs.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[m * self.cols + n]
    }

    pub fn is_acceptable(&self, m: usize, n: usize) -> bool {
        self.get(m, n) >= 0.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest entry, or 0 when nothing is acceptable.
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Everything learned about one (CU, D2D pair) combination from its
/// estimation samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub policy: CooperationPolicy,
    pub payoff: f64,
    /// `E{(1 − π) r_cu}` on the estimation samples (the full `E{r_cu}` when
    /// the pair is infeasible).
    pub cu_rate: f64,
}

pub fn estimate_pair(dist: &RateDistribution, r_th: f64) -> Result<PairEstimate> {
    let policy = solve_threshold(dist, r_th)?;
    Ok(PairEstimate {
        policy,
        payoff: expected_payoff(&policy, dist),
        cu_rate: expected_cu_rate(&policy, dist),
    })
}

/// Pair estimates for a whole scenario, row-major over (CU, D2D pair).
#[derive(Debug, Clone)]
pub struct PairTable {
    pub n_cu: usize,
    pub n_d2d: usize,
    pub estimates: Vec<PairEstimate>,
}

impl PairTable {
    pub fn get(&self, m: usize, n: usize) -> &PairEstimate {
        &self.estimates[m * self.n_d2d + n]
    }

    pub fn payoff_matrix(&self) -> PayoffMatrix {
        PayoffMatrix {
            rows: self.n_cu,
            cols: self.n_d2d,
            values: self.estimates.iter().map(|e| e.payoff).collect(),
        }
    }
}

/// Empirical state distribution of pair `(m, n)` from `samples` draws of the
/// stream `streams.child(m).child(n)`.
pub fn sample_pair_distribution(
    geometry: &Geometry,
    budget: &LinkBudget,
    m: usize,
    n: usize,
    samples: usize,
    streams: &SeedStream,
) -> Result<RateDistribution> {
    let links = geometry.pair_links(m, n)?;
    let mut rng = streams.child(m as u64).child(n as u64).rng();
    let draws = (0..samples)
        .map(|_| sample_rate_pair(&links, budget, &mut rng))
        .collect();
    RateDistribution::empirical(draws)
}

/// Estimate every pair of a scenario. Pairs run in parallel on independent
/// per-pair streams, so the result does not depend on the worker count.
pub fn estimate_pairs(
    geometry: &Geometry,
    budget: &LinkBudget,
    r_th: f64,
    samples_per_pair: usize,
    streams: &SeedStream,
) -> Result<PairTable> {
    if samples_per_pair == 0 {
        return Err(Error::domain("samples_per_pair must be at least 1"));
    }
    let (n_cu, n_d2d) = (geometry.n_cu(), geometry.n_d2d());
    let estimates = (0..n_cu * n_d2d)
        .into_par_iter()
        .map(|k| {
            let (m, n) = (k / n_d2d, k % n_d2d);
            let dist = sample_pair_distribution(geometry, budget, m, n, samples_per_pair, streams)?;
            estimate_pair(&dist, r_th)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairTable {
        n_cu,
        n_d2d,
        estimates,
    })
}

pub fn build_payoff_matrix(
    geometry: &Geometry,
    budget: &LinkBudget,
    r_th: f64,
    samples_per_pair: usize,
    streams: &SeedStream,
) -> Result<PayoffMatrix> {
    Ok(estimate_pairs(geometry, budget, r_th, samples_per_pair, streams)?.payoff_matrix())
}

/// Random discrete distribution with up to `max_states` states, rates uniform
/// in `[0, max_rate)`.
pub fn random_discrete<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_rate: f64,
) -> RateDistribution {
    let k = rng.random_range(1..=max_states.max(1));
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let support = raw
        .iter()
        .map(|w| {
            let s = RatePair::new(rng.random_range(0.0..max_rate), rng.random_range(0.0..max_rate));
            (s, w / total)
        })
        .collect();
    RateDistribution::Discrete(support)
}
