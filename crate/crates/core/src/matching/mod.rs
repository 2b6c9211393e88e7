//! Frame-level pairing of CUs with D2D pairs.
//!
//! A [`Matching`] is a one-to-one mapping between CUs and D2D pairs together
//! with the price each matched CU charges its partner. The proposed pairing
//! is the ascending price auction in [`auction`]; [`assignment`] and
//! [`baselines`] provide the schemes it is compared against.

pub mod assignment;
pub mod auction;
pub mod baselines;
pub mod stability;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PayoffMatrix;

pub use assignment::optimal_assignment;
pub use auction::{auction_match, demand, Auction, AuctionState};
pub use baselines::{match_without_transfer, random_match};
pub use stability::{is_epsilon_stable, Stability, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Partner of each CU.
    pub mu_cu: Vec<Option<usize>>,
    /// Partner of each D2D pair.
    pub mu_d2d: Vec<Option<usize>>,
    /// Price charged by each CU; zero when unmatched.
    pub prices: Vec<f64>,
}

impl Matching {
    pub fn empty(n_cu: usize, n_d2d: usize) -> Self {
        Matching {
            mu_cu: vec![None; n_cu],
            mu_d2d: vec![None; n_d2d],
            prices: vec![0.0; n_cu],
        }
    }

    pub fn n_cu(&self) -> usize {
        self.mu_cu.len()
    }

    pub fn n_d2d(&self) -> usize {
        self.mu_d2d.len()
    }

    /// Match CU `m` with D2D pair `n`, dropping any previous partners of both.
    pub fn pair(&mut self, m: usize, n: usize, price: f64) {
        self.unpair_cu(m);
        if let Some(old) = self.mu_d2d[n] {
            self.unpair_cu(old);
        }
        self.mu_cu[m] = Some(n);
        self.mu_d2d[n] = Some(m);
        self.prices[m] = price;
    }

    /// Unmatch CU `m`, returning its former partner.
    pub fn unpair_cu(&mut self, m: usize) -> Option<usize> {
        let old = self.mu_cu[m].take();
        if let Some(n) = old {
            self.mu_d2d[n] = None;
        }
        self.prices[m] = 0.0;
        old
    }

    /// Matched `(cu, d2d)` pairs in CU order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mu_cu
            .iter()
            .enumerate()
            .filter_map(|(m, n)| n.map(|n| (m, n)))
    }

    pub fn matched_count(&self) -> usize {
        self.pairs().count()
    }

    /// Sum of `v_mn` over matched pairs.
    pub fn total_payoff(&self, payoffs: &PayoffMatrix) -> f64 {
        self.pairs().map(|(m, n)| payoffs.get(m, n)).sum()
    }

    /// Check mutual consistency, nonnegative prices and zero prices for
    /// unmatched CUs.
    pub fn validate(&self) -> Result<()> {
        if self.prices.len() != self.mu_cu.len() {
            return Err(Error::domain("one price per CU required"));
        }
        for (m, partner) in self.mu_cu.iter().enumerate() {
            match partner {
                Some(n) if self.mu_d2d.get(*n) != Some(&Some(m)) => {
                    return Err(Error::domain(format!("CU {m} -> D2D {n} is not mutual")));
                }
                None if self.prices[m] != 0.0 => {
                    return Err(Error::domain(format!("unmatched CU {m} has a price")));
                }
                _ => {}
            }
            if self.prices[m].is_nan() || self.prices[m] < 0.0 {
                return Err(Error::domain(format!("CU {m} has a negative price")));
            }
        }
        for (n, partner) in self.mu_d2d.iter().enumerate() {
            if let Some(m) = partner {
                if self.mu_cu.get(*m) != Some(&Some(n)) {
                    return Err(Error::domain(format!("D2D {n} -> CU {m} is not mutual")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utilities {
    /// CU utilities: the price received.
    pub theta: Vec<f64>,
    /// D2D utilities: payoff minus price paid.
    pub delta: Vec<f64>,
}

pub fn utilities(matching: &Matching, payoffs: &PayoffMatrix) -> Utilities {
    let mut theta = vec![0.0; matching.n_cu()];
    let mut delta = vec![0.0; matching.n_d2d()];
    for (m, n) in matching.pairs() {
        theta[m] = matching.prices[m];
        delta[n] = payoffs.get(m, n) - matching.prices[m];
    }
    Utilities { theta, delta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utilities_examples() {
        let v = PayoffMatrix::from_rows(&[vec![5.0]]).unwrap();
        let u = utilities(&Matching::empty(1, 1), &v);
        assert_eq!(u.theta, vec![0.0]);
        assert_eq!(u.delta, vec![0.0]);

        let mut phi = Matching::empty(1, 1);
        phi.pair(0, 0, 2.0);
        let u = utilities(&phi, &v);
        assert_eq!(u.theta, vec![2.0]);
        assert_eq!(u.delta, vec![3.0]);

        let v = PayoffMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 4.0]]).unwrap();
        let mut phi = Matching::empty(2, 2);
        phi.pair(0, 0, 1.0);
        phi.pair(1, 1, 2.0);
        let u = utilities(&phi, &v);
        assert_eq!(u.theta, vec![1.0, 2.0]);
        assert_eq!(u.delta, vec![2.0, 2.0]);
    }

    #[test]
    fn pairing_keeps_mapping_mutual() {
        let mut phi = Matching::empty(3, 2);
        phi.pair(0, 1, 1.0);
        phi.pair(2, 1, 2.0);
        assert_eq!(phi.mu_cu, vec![None, None, Some(1)]);
        assert_eq!(phi.mu_d2d, vec![None, Some(2)]);
        assert_eq!(phi.prices, vec![0.0, 0.0, 2.0]);
        phi.validate().unwrap();
        assert_eq!(phi.unpair_cu(2), Some(1));
        phi.validate().unwrap();
        assert_eq!(phi.matched_count(), 0);
    }

    #[test]
    fn validate_catches_broken_matchings() {
        let mut phi = Matching::empty(2, 2);
        phi.mu_cu[0] = Some(1);
        assert!(phi.validate().is_err());
        let mut phi = Matching::empty(2, 2);
        phi.prices[1] = 3.0;
        assert!(phi.validate().is_err());
    }
}
