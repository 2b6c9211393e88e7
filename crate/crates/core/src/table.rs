//! Comma-separated fixtures: one distribution state, payoff entry or
//! matching slot per line, with a header.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::channel::RatePair;
use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::policy::{PayoffMatrix, RateDistribution};

#[derive(Debug, Serialize, Deserialize)]
struct StateRow {
    r_cu: f64,
    r_d2d: f64,
    probability: f64,
}

pub fn write_distribution<W: Write>(dist: &RateDistribution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (s, p) in dist.weighted() {
        w.serialize(StateRow {
            r_cu: s.r_cu,
            r_d2d: s.r_d2d,
            probability: p,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Read a discrete distribution written by [`write_distribution`].
pub fn read_distribution<R: Read>(input: R) -> Result<RateDistribution> {
    let mut r = csv::Reader::from_reader(input);
    let support = r
        .deserialize::<StateRow>()
        .map(|row| row.map(|s| (RatePair::new(s.r_cu, s.r_d2d), s.probability)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    RateDistribution::discrete(support)
}

#[derive(Debug, Serialize, Deserialize)]
struct PayoffRow {
    cu: usize,
    d2d: usize,
    payoff: f64,
}

pub fn write_payoffs<W: Write>(payoffs: &PayoffMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for cu in 0..payoffs.rows() {
        for d2d in 0..payoffs.cols() {
            w.serialize(PayoffRow {
                cu,
                d2d,
                payoff: payoffs.get(cu, d2d),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a payoff matrix; every (cu, d2d) entry of the implied grid must be
/// present exactly once.
pub fn read_payoffs<R: Read>(input: R) -> Result<PayoffMatrix> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize::<PayoffRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n_cu = rows.iter().map(|r| r.cu + 1).max().unwrap_or(0);
    let n_d2d = rows.iter().map(|r| r.d2d + 1).max().unwrap_or(0);
    let mut values = vec![None; n_cu * n_d2d];
    for row in &rows {
        let slot = &mut values[row.cu * n_d2d + row.d2d];
        if slot.replace(row.payoff).is_some() {
            return Err(Error::Table(format!("duplicate entry ({}, {})", row.cu, row.d2d)));
        }
    }
    let values = values
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Table("payoff grid has missing entries".into()))?;
    PayoffMatrix::new(n_cu, n_d2d, values)
}

#[derive(Debug, Serialize, Deserialize)]
struct SlotRow {
    cu: Option<usize>,
    d2d: Option<usize>,
    price: f64,
}

/// One line per CU (with its partner, if any) followed by one line per
/// unmatched D2D pair.
pub fn write_matching<W: Write>(matching: &Matching, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (m, partner) in matching.mu_cu.iter().enumerate() {
        w.serialize(SlotRow {
            cu: Some(m),
            d2d: *partner,
            price: matching.prices[m],
        })?;
    }
    for (n, partner) in matching.mu_d2d.iter().enumerate() {
        if partner.is_none() {
            w.serialize(SlotRow {
                cu: None,
                d2d: Some(n),
                price: 0.0,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matching<R: Read>(input: R) -> Result<Matching> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize::<SlotRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n_cu = rows.iter().filter_map(|r| r.cu).map(|m| m + 1).max().unwrap_or(0);
    let n_d2d = rows.iter().filter_map(|r| r.d2d).map(|n| n + 1).max().unwrap_or(0);
    let mut matching = Matching::empty(n_cu, n_d2d);
    for row in rows {
        match (row.cu, row.d2d) {
            (Some(m), Some(n)) => {
                if matching.mu_cu[m].is_some() || matching.mu_d2d[n].is_some() {
                    return Err(Error::Table(format!("user listed twice in ({m}, {n})")));
                }
                matching.pair(m, n, row.price);
            }
            (Some(m), None) => matching.prices[m] = row.price,
            (None, Some(_)) => {}
            (None, None) => return Err(Error::Table("row names neither a CU nor a D2D pair".into())),
        }
    }
    matching.validate()?;
    Ok(matching)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_format_is_one_entry_per_line() {
        let v = PayoffMatrix::from_rows(&[vec![1.5, -1.0]]).unwrap();
        let mut buf = Vec::new();
        write_payoffs(&v, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cu,d2d,payoff\n0,0,1.5\n0,1,-1.0\n");
    }

    #[test]
    fn missing_payoff_entry_is_rejected() {
        let text = "cu,d2d,payoff\n0,0,1.0\n1,1,2.0\n";
        assert!(matches!(read_payoffs(text.as_bytes()), Err(Error::Table(_))));
    }

    #[test]
    fn matching_lists_unmatched_users() {
        let mut phi = Matching::empty(2, 3);
        phi.pair(1, 2, 4.0);
        let mut buf = Vec::new();
        write_matching(&phi, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cu,d2d,price\n0,,0.0\n1,2,4.0\n,0,0.0\n,1,0.0\n");
        assert_eq!(read_matching(text.as_bytes()).unwrap(), phi);
    }

    #[test]
    fn distribution_probabilities_are_checked() {
        let text = "r_cu,r_d2d,probability\n1.0,2.0,0.4\n";
        assert!(read_distribution(text.as_bytes()).is_err());
    }
}
