//! Impatience-rate estimation, LOB-implied volatility and diagnostics.

mod dejd_fit;
mod diagnostics;
mod gbm_fit;
mod smile;
mod summary;

pub use dejd_fit::{fit_dejd, project_jump_params, solve_jump_params};
pub use diagnostics::{diagnostics, power_law_fit, Diagnostics, SegmentFit, ZrPair};
pub use gbm_fit::{fit_gbm, fit_gbm_side};
pub use smile::{extract_smile, ObservedUtilities, SmileConfig, SmileDrift, SmilePoint, SmileResult, SmileTarget};
pub use summary::{daily_summary, DailySummary, SideSummary, SUMMARY_HEADER};

use crate::error::{Error, Result};
use crate::estimators::{RollingStats, DEFAULT_SIGMA_MIN, DEFAULT_WINDOW};
use crate::ingest::ResampledSeries;
use crate::Side;

/// Which book level supplies the distance to fill for the rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelSelector {
    /// Deepest level quoted at each grid point.
    #[default]
    Deepest,
    Level(usize),
}

impl std::str::FromStr for LevelSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "deepest" {
            return Ok(LevelSelector::Deepest);
        }
        s.parse()
            .map(LevelSelector::Level)
            .map_err(|_| Error::Config(format!("level selector must be `deepest` or an index, got `{s}`")))
    }
}

impl std::fmt::Display for LevelSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevelSelector::Deepest => f.write_str("deepest"),
            LevelSelector::Level(k) => write!(f, "{k}"),
        }
    }
}

/// Optional extra constraints for the jump-diffusion fit. All off by
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StrictConstraints {
    /// Force `η₁ = η₂`.
    pub equal_etas: bool,
    /// Apply the continuity bound to λ as well.
    pub lambda_continuity: bool,
    /// Apply the continuity bound to p as well.
    pub p_continuity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub window_n: usize,
    /// Length of the time unit that rates are quoted in, in seconds. `None`
    /// measures time in grid steps.
    pub time_unit_s: Option<f64>,
    pub steps: usize,
    pub r_min: f64,
    pub r0: f64,
    /// Utility the first block is compared against. Computed from `r0` at
    /// the first fitted point when absent.
    pub u0: Option<f64>,
    /// Continuity bound `(η - η_prev)² ≤ eps`.
    pub eps: f64,
    /// Tolerance of the scalar rate search.
    pub delta: f64,
    /// Evaluation budget of each simplex search.
    pub max_iter: usize,
    pub sigma_min: f64,
    pub level: LevelSelector,
    pub strict: StrictConstraints,
    /// Starting jump rates for the first jump-diffusion point.
    pub eta0: Option<(f64, f64)>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            window_n: DEFAULT_WINDOW,
            time_unit_s: None,
            steps: 2,
            r_min: 0.01,
            r0: 1.0,
            u0: None,
            eps: 0.25,
            delta: 1e-8,
            max_iter: 3000,
            sigma_min: DEFAULT_SIGMA_MIN,
            level: LevelSelector::Deepest,
            strict: StrictConstraints::default(),
            eta0: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.r_min > 0.0) || !(self.r0 >= self.r_min) {
            return Err(Error::Config(format!("need 0 < r_min <= r0, got ({}, {})", self.r_min, self.r0)));
        }
        if !(self.eps > 0.0 && self.delta > 0.0 && self.sigma_min > 0.0) {
            return Err(Error::Config("eps, delta and sigma_min must be positive".into()));
        }
        if let Some(u0) = self.u0 {
            if !(u0 > 0.0) {
                return Err(Error::Config(format!("u0 must be positive, got {u0}")));
            }
        }
        if let Some(t) = self.time_unit_s {
            if !(t > 0.0) {
                return Err(Error::Config(format!("time unit must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Grid step in model time units.
    pub fn dt(&self, series: &ResampledSeries) -> f64 {
        self.time_unit_s.map_or(1.0, |u| series.dt_s / u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    Gbm,
    Dejd,
}

impl FitModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitModel::Gbm => "gbm",
            FitModel::Dejd => "dejd",
        }
    }
}

/// Per-point rates and utilities of one book side. Invalid entries hold NaN.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SideFit {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// Signed distance to fill used at each point.
    pub d: Vec<f64>,
    /// Start price used at each point.
    pub s0: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SideFit {
    fn new(n: usize) -> Self {
        SideFit {
            r: vec![f64::NAN; n],
            u: vec![f64::NAN; n],
            d: vec![f64::NAN; n],
            s0: vec![f64::NAN; n],
            valid: vec![false; n],
        }
    }
}

/// Process parameters in force at a grid point, in model time units. The
/// jump fields are zero/NaN for the diffusion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub p: f64,
    pub eta1: f64,
    pub eta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub timestamps_ms: Vec<i64>,
    /// Grid step in model time units.
    pub dt: f64,
    pub bid: SideFit,
    pub ask: SideFit,
    pub params: Vec<Option<PointParams>>,
    /// Side-points that had inputs but where the optimiser failed.
    pub failures: usize,
}

impl FitResult {
    pub fn side(&self, side: Side) -> &SideFit {
        match side {
            Side::Bid => &self.bid,
            Side::Ask => &self.ask,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideFit {
        match side {
            Side::Bid => &mut self.bid,
            Side::Ask => &mut self.ask,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }

    /// Fraction of attempted side-points where the fit failed.
    pub fn failure_fraction(&self) -> f64 {
        let ok = |s: &SideFit| s.valid.iter().filter(|v| **v).count();
        let attempted = self.failures + ok(&self.bid) + ok(&self.ask);
        if attempted == 0 {
            0.0
        } else {
            self.failures as f64 / attempted as f64
        }
    }
}

/// Smoothness penalty `Σ ((U_j - U_{j-1}) / (½ (U_j + U_{j-1})))²`.
pub fn smoothness_error(utilities: &[f64]) -> Result<f64> {
    if utilities.len() < 2 {
        return Err(Error::domain("smoothness needs at least two values"));
    }
    if let Some(bad) = utilities.iter().find(|u| !(**u > 0.0)) {
        return Err(Error::domain(format!("utilities must be positive, got {bad}")));
    }
    Ok(utilities.windows(2).map(|w| rel_step(w[0], w[1])).sum())
}

fn rel_step(prev: f64, next: f64) -> f64 {
    ((next - prev) / (0.5 * (next + prev))).powi(2)
}

/// Distance to fill on `side` at point `i` using the selected level.
pub(crate) fn select_distance(
    series: &ResampledSeries,
    side: Side,
    i: usize,
    sel: LevelSelector,
) -> Option<(f64, f64)> {
    let level = match sel {
        LevelSelector::Deepest => series.deepest_level(side, i)?,
        LevelSelector::Level(k) if k < series.depth() => k,
        LevelSelector::Level(_) => return None,
    };
    let s0 = series.start(side, i)?;
    let d = series.distance(side, i, level)?;
    (d != 0.0 && s0 + d > 0.0).then_some((s0, d))
}

fn check_lengths(series: &ResampledSeries, stats: &RollingStats) -> Result<()> {
    if series.len() != stats.len() {
        return Err(Error::Data(format!("series has {} points but statistics have {}", series.len(), stats.len())));
    }
    Ok(())
}
