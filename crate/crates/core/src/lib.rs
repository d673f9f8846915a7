//! Limit-order-book reconstruction and the price dynamics it implies.
//!
//! The crate covers the whole chain from a raw level-update feed to fitted
//! impatience rates:
//!
//! * [`ingest`] parses the `;`-separated feed, rebuilds book snapshots and
//!   resamples them onto an equidistant grid.
//! * [`estimators`] computes rolling log-return moments, realized variance
//!   and bipower variation.
//! * [`gbm`] and [`dejd`] hold the closed forms for first-passage Laplace
//!   transforms under geometric Brownian motion and Kou's double-exponential
//!   jump diffusion.
//! * [`fitting`] estimates the level-independent impatience rate, extracts
//!   the LOB-implied volatility smile and produces the diagnostic series.
//! * [`simulator`] generates seeded paths, synthetic feeds and Monte-Carlo
//!   first-passage estimates used to check the closed forms.
//! * [`report`] wires everything into the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dejd;
pub mod error;
pub mod estimators;
pub mod fitting;
pub mod gbm;
pub mod ingest;
pub mod numeric;
pub mod report;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};

/// Side of the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Bid, Side::Ask];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bid" => Ok(Side::Bid),
            "ask" => Ok(Side::Ask),
            other => Err(Error::Config(format!("unknown side `{other}`"))),
        }
    }
}
