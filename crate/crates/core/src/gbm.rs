//! Geometric Brownian motion: log-return moments, first-passage Laplace
//! transform and the distance-to-fill utility.

use crate::error::{Error, Result};
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::domain(format!("GBM needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(Self { mu, sigma })
    }

    /// Drift of `ln S_t / σ`.
    pub fn mu_hat(&self) -> f64 {
        (self.mu - 0.5 * self.sigma * self.sigma) / self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogReturnMoments {
    pub mean: f64,
    pub var: f64,
}

pub fn gbm_moments(params: &GbmParams, dt: f64) -> LogReturnMoments {
    let s2 = params.sigma * params.sigma;
    LogReturnMoments { mean: (params.mu - 0.5 * s2) * dt, var: s2 * dt }
}

/// A barrier at `s0 + d` for a process started at `s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingSpec {
    pub s0: f64,
    pub d: f64,
}

impl HittingSpec {
    pub fn new(s0: f64, d: f64) -> Result<Self> {
        if !(s0 > 0.0) || !s0.is_finite() || !d.is_finite() {
            return Err(Error::domain(format!("bad start price {s0} or distance {d}")));
        }
        if d == 0.0 {
            return Err(Error::domain("distance to fill must be nonzero"));
        }
        if s0 + d <= 0.0 {
            return Err(Error::domain(format!("barrier {s0} + {d} is not positive")));
        }
        Ok(Self { s0, d })
    }

    /// Barrier in log space, `ln((s0 + d) / s0)`.
    pub fn log_distance(&self) -> f64 {
        (self.d / self.s0).ln_1p()
    }

    pub fn z(&self, sigma: f64) -> f64 {
        self.log_distance() / sigma
    }
}

/// `E[exp(-r τ)]` for a unit Brownian motion with drift `mu_hat` first
/// hitting level `z`.
pub fn bm_hitting_laplace(mu_hat: f64, z: f64, r: f64) -> f64 {
    (mu_hat * z - z.abs() * (2.0 * r + mu_hat * mu_hat).sqrt()).exp()
}

/// Utility `|D| E[exp(-r τ)]` of a limit order at distance `D`.
pub fn gbm_utility(params: &GbmParams, spec: &HittingSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("impatience rate must be positive, got {r}")));
    }
    Ok(spec.d.abs() * bm_hitting_laplace(params.mu_hat(), spec.z(params.sigma), r))
}

pub const IMPLIED_SIGMA_MIN: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 60;

/// Volatility at which the GBM utility with drift `mu` equals `c`.
pub fn implied_sigma(spec: &HittingSpec, mu: f64, r: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < spec.d.abs()) {
        return Err(Error::domain(format!("target utility {c} outside (0, |D| = {})", spec.d.abs())));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("impatience rate must be positive, got {r}")));
    }
    let gap = |ln_sigma: f64| {
        let p = GbmParams { mu, sigma: ln_sigma.exp() };
        spec.d.abs() * bm_hitting_laplace(p.mu_hat(), spec.z(p.sigma), r) - c
    };
    let lo = IMPLIED_SIGMA_MIN.ln();
    if gap(lo) >= 0.0 {
        return Err(Error::solver(format!("utility already exceeds {c} at the volatility floor")));
    }
    let mut hi = 0.0f64;
    let mut found = gap(hi) > 0.0;
    for _ in 0..MAX_DOUBLINGS {
        if found {
            break;
        }
        hi += std::f64::consts::LN_2;
        found = gap(hi) > 0.0;
    }
    if !found {
        return Err(Error::solver(format!("no volatility reaches utility {c} for D = {}", spec.d)));
    }
    let x = bisect(gap, lo, hi, 1e-13, 400)?;
    Ok(x.exp())
}
