//! Pairing schemes the auction is compared against.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::matching::Matching;
use crate::policy::PayoffMatrix;

/// Deferred acceptance without transfers.
///
/// D2D pairs propose in a random order, each walking down its acceptable CUs
/// by decreasing payoff (lowest index on ties). CUs are indifferent among
/// acceptable partners, so each keeps its first proposer and rejects the rest.
pub fn match_without_transfer<R: Rng + ?Sized>(payoffs: &PayoffMatrix, rng: &mut R) -> Matching {
    let (rows, cols) = (payoffs.rows(), payoffs.cols());
    let mut matching = Matching::empty(rows, cols);
    let mut order: Vec<usize> = (0..cols).collect();
    order.shuffle(rng);
    for n in order {
        let mut prefs: Vec<usize> = (0..rows).filter(|&m| payoffs.is_acceptable(m, n)).collect();
        prefs.sort_by(|&a, &b| payoffs.get(b, n).total_cmp(&payoffs.get(a, n)).then(a.cmp(&b)));
        if let Some(m) = prefs.into_iter().find(|&m| matching.mu_cu[m].is_none()) {
            matching.pair(m, n, 0.0);
        }
    }
    matching
}

/// Uniformly random pairing of `min(M, N)` CUs with D2D pairs, blind to
/// acceptability.
pub fn random_match<R: Rng + ?Sized>(n_cu: usize, n_d2d: usize, rng: &mut R) -> Matching {
    let mut matching = Matching::empty(n_cu, n_d2d);
    let mut cus: Vec<usize> = (0..n_cu).collect();
    let mut d2ds: Vec<usize> = (0..n_d2d).collect();
    cus.shuffle(rng);
    d2ds.shuffle(rng);
    for (m, n) in cus.into_iter().zip(d2ds) {
        matching.pair(m, n, 0.0);
    }
    matching
}
