//! Certifier for ε-stability of a matching with transfers.

use crate::matching::{utilities, Matching};
use crate::policy::PayoffMatrix;

/// Slack absorbing floating-point rounding in utility sums.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    NegativeCuUtility { cu: usize, utility: f64 },
    NegativeD2dUtility { d2d: usize, utility: f64 },
    /// `θ_m + δ_n < v_mn − ε`: the pair would rather deal with each other.
    BlockingPair { cu: usize, d2d: usize, shortfall: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stability {
    Stable,
    Unstable(Violation),
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }

    pub fn witness(&self) -> Option<Violation> {
        match self {
            Stability::Stable => None,
            Stability::Unstable(v) => Some(*v),
        }
    }
}

/// Check individual rationality for every user and the ε-blocking condition
/// for every acceptable pair. Reports the first violation found.
pub fn is_epsilon_stable(matching: &Matching, payoffs: &PayoffMatrix, epsilon: f64) -> Stability {
    let u = utilities(matching, payoffs);
    for (cu, &utility) in u.theta.iter().enumerate() {
        if utility < -ROUNDING_SLACK {
            return Stability::Unstable(Violation::NegativeCuUtility { cu, utility });
        }
    }
    for (d2d, &utility) in u.delta.iter().enumerate() {
        if utility < -ROUNDING_SLACK {
            return Stability::Unstable(Violation::NegativeD2dUtility { d2d, utility });
        }
    }
    for cu in 0..payoffs.rows() {
        for d2d in 0..payoffs.cols() {
            if !payoffs.is_acceptable(cu, d2d) {
                continue;
            }
            let v = payoffs.get(cu, d2d);
            let shortfall = (v - epsilon) - (u.theta[cu] + u.delta[d2d]);
            if shortfall > ROUNDING_SLACK * v.max(1.0) {
                return Stability::Unstable(Violation::BlockingPair { cu, d2d, shortfall });
            }
        }
    }
    Stability::Stable
}
