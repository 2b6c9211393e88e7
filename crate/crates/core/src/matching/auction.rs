//! Ascending price auction converging to an ε-stable matching with transfers.
//!
//! Every round, each unmatched D2D pair proposes to the CU maximizing its net
//! payoff `v_mn − β_m` under the broadcast price requirements `β`. CUs then
//! decide in two passes over the CU list:
//!
//! 1. A CU that is unmatched, gets no proposal now but got some last round
//!    (after raising its requirement) picks one of last round's proposers at
//!    random at the previous requirement. That proposer's current proposal is
//!    withdrawn.
//! 2. A CU with exactly one proposal that is unmatched, or matched below its
//!    current requirement, takes the proposer at the current requirement.
//!    Otherwise a CU with proposals drops its partner (who keeps bidding if it
//!    was paying the full requirement) and raises its requirement by ε. CUs
//!    without proposals hold.
//!
//! The auction stops after a round in which nobody proposed.
//!
//! Requirements and prices are tracked as integer multiples of ε so that price
//! comparisons are exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::policy::PayoffMatrix;

/// Demand of D2D pair `n`: the acceptable CU with the largest nonnegative
/// net payoff `v_mn − β_m`, lowest index on ties.
pub fn demand(n: usize, beta: &[f64], payoffs: &PayoffMatrix) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, &b) in beta.iter().enumerate().take(payoffs.rows()) {
        if !payoffs.is_acceptable(m, n) {
            continue;
        }
        let net = payoffs.get(m, n) - b;
        if net >= 0.0 && best.is_none_or(|(_, v)| net > v) {
            best = Some((m, net));
        }
    }
    best.map(|(m, _)| m)
}

/// Full auction state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionState {
    /// Rounds completed.
    pub t: u64,
    /// Requirement of each CU in multiples of ε.
    pub beta_steps: Vec<u64>,
    /// Requirements broadcast in the last completed round.
    pub prev_beta_steps: Vec<u64>,
    /// Effective proposals of the last completed round, row-major M×N.
    pub proposals: Vec<bool>,
    /// Effective proposals of the round before that.
    pub prev_proposals: Vec<bool>,
    /// Price of each CU in multiples of ε.
    pub price_steps: Vec<u64>,
    pub current: Matching,
    pub epsilon: f64,
}

impl AuctionState {
    fn new(n_cu: usize, n_d2d: usize, epsilon: f64) -> Self {
        AuctionState {
            t: 0,
            beta_steps: vec![0; n_cu],
            prev_beta_steps: vec![0; n_cu],
            proposals: vec![false; n_cu * n_d2d],
            prev_proposals: vec![false; n_cu * n_d2d],
            price_steps: vec![0; n_cu],
            current: Matching::empty(n_cu, n_d2d),
            epsilon,
        }
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta_steps.iter().map(|&k| k as f64 * self.epsilon).collect()
    }
}

/// Round-by-round driver for the auction.
#[derive(Debug, Clone)]
pub struct Auction<'a> {
    payoffs: &'a PayoffMatrix,
    state: AuctionState,
    finished: bool,
}

impl<'a> Auction<'a> {
    pub fn new(payoffs: &'a PayoffMatrix, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("price step must be positive, got {epsilon}")));
        }
        Ok(Auction {
            payoffs,
            state: AuctionState::new(payoffs.rows(), payoffs.cols(), epsilon),
            finished: false,
        })
    }

    pub fn state(&self) -> &AuctionState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Safety bound on the number of rounds.
    pub fn round_cap(&self) -> u64 {
        let (m, n) = (self.payoffs.rows() as u64, self.payoffs.cols() as u64);
        let steps = (self.payoffs.max_value() / self.state.epsilon).ceil() as u64;
        10 * (m * steps + m + n)
    }

    /// Play one round. Returns `false` once the auction has terminated.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.finished {
            return false;
        }
        let v = self.payoffs;
        let (n_cu, n_d2d) = (v.rows(), v.cols());
        let st = &mut self.state;
        let eps = st.epsilon;
        let beta = st.beta();
        let beta_steps_t = st.beta_steps.clone();
        let idx = |m: usize, n: usize| m * n_d2d + n;

        let mut g = vec![false; n_cu * n_d2d];
        let mut target = vec![None; n_d2d];
        for n in 0..n_d2d {
            if st.current.mu_d2d[n].is_some() {
                continue;
            }
            if let Some(m) = demand(n, &beta, v) {
                g[idx(m, n)] = true;
                target[n] = Some(m);
            }
        }
        let proposed = target.iter().any(Option::is_some);
        let prev = &st.proposals;
        let count = |g: &[bool], m: usize| g[m * n_d2d..(m + 1) * n_d2d].iter().filter(|&&x| x).count();

        // CUs that were outbid into silence settle for a previous proposer
        for m in 0..n_cu {
            if count(&g, m) != 0 || count(prev, m) == 0 || st.current.mu_cu[m].is_some() {
                continue;
            }
            let candidates: Vec<usize> = (0..n_d2d)
                .filter(|&n| prev[idx(m, n)] && st.current.mu_d2d[n].is_none())
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let chosen = candidates[rng.random_range(0..candidates.len())];
            st.price_steps[m] = st.prev_beta_steps[m];
            st.current.pair(m, chosen, st.prev_beta_steps[m] as f64 * eps);
            if let Some(other) = target[chosen].take() {
                g[idx(other, chosen)] = false;
            }
        }

        for m in 0..n_cu {
            let proposers: Vec<usize> = (0..n_d2d).filter(|&n| g[idx(m, n)]).collect();
            let unmatched = st.current.mu_cu[m].is_none();
            let underpriced = st.price_steps[m] < st.beta_steps[m];
            if proposers.len() == 1 && (unmatched || underpriced) {
                st.price_steps[m] = st.beta_steps[m];
                st.current.pair(m, proposers[0], beta[m]);
            } else if !proposers.is_empty() {
                let paid_full = st.price_steps[m] == st.beta_steps[m];
                if let Some(old) = st.current.unpair_cu(m) {
                    if paid_full {
                        g[idx(m, old)] = true;
                    }
                }
                st.price_steps[m] = 0;
                st.beta_steps[m] += 1;
            }
        }

        st.prev_proposals = std::mem::replace(&mut st.proposals, g);
        st.prev_beta_steps = beta_steps_t;
        st.t += 1;
        if !proposed {
            self.finished = true;
        }
        proposed
    }

    /// Run to completion, failing if the round cap is exceeded.
    pub fn run<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<Matching> {
        let cap = self.round_cap();
        while self.step(rng) {
            if self.state.t > cap {
                return Err(Error::IterationCap {
                    cap,
                    state: Box::new(self.state),
                });
            }
        }
        Ok(self.state.current)
    }
}

pub fn auction_match<R: Rng + ?Sized>(
    payoffs: &PayoffMatrix,
    epsilon: f64,
    rng: &mut R,
) -> Result<Matching> {
    Auction::new(payoffs, epsilon)?.run(rng)
}
