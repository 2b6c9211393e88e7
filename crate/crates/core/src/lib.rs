//! Two-timescale resource allocation for cooperative device-to-device (D2D)
//! relaying in a single cellular cell.
//!
//! Each cell-edge cellular user (CU) may lease part of its uplink channel to
//! one D2D pair whose transmitter relays the CU's traffic in return. Two
//! decisions are made at different timescales:
//!
//! * per subframe, a threshold [`policy::CooperationPolicy`] splits the
//!   subframe between the relayed CU and the D2D link given the instantaneous
//!   rates;
//! * per frame, CUs and D2D pairs are paired from their long-term payoffs by an
//!   ascending price auction ([`matching::auction_match`]) that converges to an
//!   ε-stable matching with transfers.
//!
//! The [`sim`] module ties both together in a Monte Carlo harness and the
//! [`config`], [`runner`] and [`verify`] modules drive it from the command line.

pub mod channel;
pub mod config;
pub mod error;
pub mod matching;
pub mod policy;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod table;
pub mod verify;

pub use channel::{Geometry, LinkBudget, Point, RatePair};
pub use error::{Error, Result};
pub use matching::{Matching, Utilities};
pub use policy::{CooperationPolicy, PayoffMatrix, RateDistribution};
pub use rng::SeedStream;
pub use sim::{Scheme, SimConfig};
