//! Node geometry, fading and the instantaneous link rates.
//!
//! All rates are in nats/s/Hz (natural logarithm). A CU `m` transmits on its
//! own orthogonal channel; on that channel D2D pair `n` either relays the CU
//! (decode-and-forward with repetition coding over two half phases) or uses
//! the channel for its own link.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Point {
            x: radius * angle.cos(),
            y: radius * angle.sin(),
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Transmit powers and noise, all in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p_cu: f64,
    pub p_dt: f64,
    pub noise: f64,
}

impl LinkBudget {
    pub fn new(p_cu: f64, p_dt: f64, noise: f64) -> Result<Self> {
        for (name, v) in [("p_cu", p_cu), ("p_dt", p_dt), ("noise", noise)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(LinkBudget { p_cu, p_dt, noise })
    }

    /// Build a budget from milliwatt powers and a dBm noise floor.
    pub fn from_mw_dbm(p_cu_mw: f64, p_dt_mw: f64, noise_dbm: f64) -> Result<Self> {
        LinkBudget::new(p_cu_mw * 1e-3, p_dt_mw * 1e-3, dbm_to_watts(noise_dbm))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Positions of every node in one scenario. The BS sits at `bs_position`;
/// CU `m`, DT `n` and DR `n` are indexed from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_position: Point,
    pub cu_positions: Vec<Point>,
    pub dt_positions: Vec<Point>,
    pub dr_positions: Vec<Point>,
    pub cell_radius: f64,
    pub pathloss_exponent: f64,
}

/// Placement ranges a [`Geometry`] is checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementBounds {
    pub dt_annulus: (f64, f64),
    pub d2d_distance: (f64, f64),
}

impl Default for PlacementBounds {
    fn default() -> Self {
        PlacementBounds {
            dt_annulus: (200.0, 400.0),
            d2d_distance: (10.0, 30.0),
        }
    }
}

const PLACEMENT_TOL: f64 = 1e-9;

impl Geometry {
    pub fn n_cu(&self) -> usize {
        self.cu_positions.len()
    }

    pub fn n_d2d(&self) -> usize {
        self.dt_positions.len()
    }

    pub fn validate(&self, bounds: &PlacementBounds) -> Result<()> {
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::domain("pathloss exponent must be positive"));
        }
        if self.dt_positions.len() != self.dr_positions.len() {
            return Err(Error::domain("every DT needs exactly one DR"));
        }
        let tol = PLACEMENT_TOL * self.cell_radius.max(1.0);
        for (m, cu) in self.cu_positions.iter().enumerate() {
            let d = cu.distance(&self.bs_position);
            if (d - self.cell_radius).abs() > tol {
                return Err(Error::domain(format!("CU {m} at {d} m, not on the cell edge")));
            }
        }
        let (lo, hi) = bounds.dt_annulus;
        for (n, dt) in self.dt_positions.iter().enumerate() {
            let d = dt.distance(&self.bs_position);
            if d < lo - tol || d > hi + tol {
                return Err(Error::domain(format!("DT {n} at {d} m from the BS")));
            }
        }
        let (lo, hi) = bounds.d2d_distance;
        for (n, (dt, dr)) in self.dt_positions.iter().zip(&self.dr_positions).enumerate() {
            let d = dt.distance(dr);
            if d < lo - tol || d > hi + tol {
                return Err(Error::domain(format!("D2D pair {n} spans {d} m")));
            }
        }
        Ok(())
    }

    /// Link distances relevant to CU `m` cooperating with D2D pair `n`.
    pub fn pair_links(&self, m: usize, n: usize) -> Result<PairLinks> {
        let cu = self.cu_positions[m];
        let dt = self.dt_positions[n];
        let dr = self.dr_positions[n];
        PairLinks::new(
            LinkDistances {
                cu_bs: cu.distance(&self.bs_position),
                cu_dt: cu.distance(&dt),
                dt_bs: dt.distance(&self.bs_position),
                dt_dr: dt.distance(&dr),
            },
            self.pathloss_exponent,
        )
    }

    pub fn cu_bs_distance(&self, m: usize) -> f64 {
        self.cu_positions[m].distance(&self.bs_position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDistances {
    pub cu_bs: f64,
    pub cu_dt: f64,
    pub dt_bs: f64,
    pub dt_dr: f64,
}

/// Validated link distances for one (CU, D2D pair) combination. Sampling
/// from it cannot fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLinks {
    distances: LinkDistances,
    pathloss_exponent: f64,
}

impl PairLinks {
    pub fn new(distances: LinkDistances, pathloss_exponent: f64) -> Result<Self> {
        let d = &distances;
        for v in [d.cu_bs, d.cu_dt, d.dt_bs, d.dt_dr] {
            check_distance(v)?;
        }
        if !(pathloss_exponent > 0.0 && pathloss_exponent.is_finite()) {
            return Err(Error::domain("pathloss exponent must be positive"));
        }
        Ok(PairLinks {
            distances,
            pathloss_exponent,
        })
    }

    pub fn distances(&self) -> &LinkDistances {
        &self.distances
    }

    /// Gains for explicit fading values `[mb, mn, nb, nn]`.
    pub fn draw(&self, fading: [f64; 4]) -> ChannelDraw {
        let d = &self.distances;
        let g = self.pathloss_exponent;
        ChannelDraw {
            h_mb: gain(d.cu_bs, g, fading[0]),
            h_mn: gain(d.cu_dt, g, fading[1]),
            h_nb: gain(d.dt_bs, g, fading[2]),
            h_nn: gain(d.dt_dr, g, fading[3]),
        }
    }

    pub fn sample_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        let fading = [
            sample_fading(rng),
            sample_fading(rng),
            sample_fading(rng),
            sample_fading(rng),
        ];
        self.draw(fading)
    }
}

/// Instantaneous gains on the channel of CU `m` when paired with D2D pair `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub h_mb: f64,
    pub h_mn: f64,
    pub h_nb: f64,
    pub h_nn: f64,
}

impl ChannelDraw {
    pub fn rates(&self, budget: &LinkBudget) -> RatePair {
        let direct = cellular_rate(self.h_mb, budget);
        let relay = relay_rate(self.h_mn, self.h_mb, self.h_nb, budget);
        RatePair {
            r_cu: effective_cu_rate(direct, relay),
            r_d2d: d2d_rate(self.h_nn, budget),
        }
    }
}

/// One realization of (effective CU rate, D2D rate) for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r_cu: f64,
    pub r_d2d: f64,
}

impl RatePair {
    pub fn new(r_cu: f64, r_d2d: f64) -> Self {
        RatePair { r_cu, r_d2d }
    }
}

fn check_distance(distance: f64) -> Result<()> {
    if distance > 0.0 && distance.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("link distance must be positive, got {distance}")))
    }
}

/// Channel gain `η · d^(-γ)`.
pub fn path_gain(distance: f64, pathloss_exponent: f64, fading: f64) -> Result<f64> {
    check_distance(distance)?;
    if !(fading >= 0.0 && fading.is_finite()) {
        return Err(Error::domain(format!("fading must be nonnegative, got {fading}")));
    }
    Ok(gain(distance, pathloss_exponent, fading))
}

fn gain(distance: f64, exponent: f64, fading: f64) -> f64 {
    if fading == 0.0 {
        return 0.0;
    }
    let loss = distance.powf(-exponent);
    let g = fading * loss;
    if g.is_normal() {
        g
    } else {
        // underflow in the linear domain
        (fading.ln() - exponent * distance.ln()).exp()
    }
}

/// Unit-mean exponential fast-fading power.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

pub fn cellular_rate(h_mb: f64, budget: &LinkBudget) -> f64 {
    (budget.p_cu * h_mb / budget.noise).ln_1p()
}

/// Decode-and-forward rate over the two relay phases: half the weaker of the
/// CU→DT decode link and the combined CU+DT→BS forward link.
pub fn relay_rate(h_mn: f64, h_mb: f64, h_nb: f64, budget: &LinkBudget) -> f64 {
    let decode = (budget.p_cu * h_mn / budget.noise).ln_1p();
    let forward = (budget.p_cu * h_mb / budget.noise + budget.p_dt * h_nb / budget.noise).ln_1p();
    0.5 * decode.min(forward)
}

pub fn effective_cu_rate(r_direct: f64, r_relay: f64) -> f64 {
    r_direct.max(r_relay)
}

pub fn d2d_rate(h_nn: f64, budget: &LinkBudget) -> f64 {
    (budget.p_dt * h_nn / budget.noise).ln_1p()
}

pub fn sample_rate_pair<R: Rng + ?Sized>(
    links: &PairLinks,
    budget: &LinkBudget,
    rng: &mut R,
) -> RatePair {
    links.sample_draw(rng).rates(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn unit_budget() -> LinkBudget {
        LinkBudget::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn path_gain_examples() {
        assert_eq!(path_gain(1.0, 4.0, 1.0).unwrap(), 1.0);
        assert!((path_gain(10.0, 4.0, 1.0).unwrap() - 1e-4).abs() < 1e-18);
        let g = path_gain(250.0, 4.0, 0.7).unwrap();
        let via_logs = (0.7f64.ln() - 4.0 * 250f64.ln()).exp();
        assert!((g - via_logs).abs() <= 1e-12 * via_logs);
        assert!((g - 0.7 / 250f64.powi(4)).abs() <= 1e-15 * g);
    }

    #[test]
    fn path_gain_rejects_nonpositive_distance() {
        assert!(matches!(path_gain(0.0, 4.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(path_gain(-3.0, 4.0, 1.0), Err(Error::Domain(_))));
        assert!(path_gain(1.0, 4.0, -0.1).is_err());
    }

    #[test]
    fn path_gain_survives_extreme_loss() {
        let g = path_gain(1e80, 4.0, 1e10).unwrap();
        assert!(g >= 0.0 && g.is_finite());
    }

    #[test]
    fn cellular_rate_examples() {
        let b = unit_budget();
        assert_eq!(cellular_rate(0.0, &b), 0.0);
        assert!((cellular_rate(std::f64::consts::E - 1.0, &b) - 1.0).abs() < 1e-15);
        assert!((cellular_rate(2f64.exp() - 1.0, &b) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn relay_rate_examples() {
        let b = unit_budget();
        assert_eq!(relay_rate(0.0, 5.0, 5.0, &b), 0.0);
        assert_eq!(relay_rate(5.0, 0.0, 0.0, &b), 0.0);
        // decode link e^4 - 1, forward link split over both terms summing to e^2 - 1
        let fwd = 2f64.exp() - 1.0;
        let r = relay_rate(4f64.exp() - 1.0, 0.25 * fwd, 0.75 * fwd, &b);
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn effective_and_d2d_examples() {
        assert_eq!(effective_cu_rate(2.0, 1.0), 2.0);
        assert_eq!(effective_cu_rate(0.0, 0.0), 0.0);
        assert_eq!(effective_cu_rate(1.3, 1.7), 1.7);
        let b = unit_budget();
        assert_eq!(d2d_rate(0.0, &b), 0.0);
        assert!((d2d_rate(std::f64::consts::E - 1.0, &b) - 1.0).abs() < 1e-15);
        assert!((d2d_rate(3f64.exp() - 1.0, &b) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn fading_moments() {
        let mut rng = SeedStream::new(11).rng();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut above = 0usize;
        for _ in 0..n {
            let eta = sample_fading(&mut rng);
            assert!(eta >= 0.0);
            sum += eta;
            above += (eta > 1.0) as usize;
        }
        assert!((sum / n as f64 - 1.0).abs() < 0.01);
        assert!((above as f64 / n as f64 - (-1f64).exp()).abs() < 0.01);
    }

    #[test]
    fn fading_is_seed_deterministic() {
        let mut a = SeedStream::new(3).rng();
        let mut b = SeedStream::new(3).rng();
        for _ in 0..100 {
            assert_eq!(sample_fading(&mut a), sample_fading(&mut b));
        }
    }

    #[test]
    fn zero_fading_gives_zero_rates() {
        let links = PairLinks::new(
            LinkDistances { cu_bs: 500.0, cu_dt: 250.0, dt_bs: 300.0, dt_dr: 20.0 },
            4.0,
        )
        .unwrap();
        let b = LinkBudget::from_mw_dbm(20.0, 20.0, -100.0).unwrap();
        assert_eq!(links.draw([0.0; 4]).rates(&b), RatePair::new(0.0, 0.0));
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-25);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
    }
}
