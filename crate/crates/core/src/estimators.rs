//! Rolling log-return statistics and realized/bipower variation.
//!
//! Every estimate at grid point `i` uses the `N` log-returns that end at
//! `i - 1`, so nothing at or after `i` can influence it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_SIGMA_MIN: f64 = 1e-8;

/// Per-grid-point rolling estimates. Entries with `valid[i] == false` hold
/// NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingStats {
    pub window_n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub rv: Vec<f64>,
    pub bv: Vec<f64>,
    pub bv_capped: Vec<f64>,
    pub valid: Vec<bool>,
}

impl RollingStats {
    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    /// Builds stats directly from per-point values, with `bv = bv_capped`.
    /// Useful for feeding known parameters into the fitting routines.
    pub fn from_parts(window_n: usize, mean: Vec<f64>, std: Vec<f64>, rv: Vec<f64>, bv_capped: Vec<f64>) -> Self {
        let valid = mean.iter().zip(&std).map(|(m, s)| m.is_finite() && s.is_finite()).collect();
        RollingStats { window_n, mean, std, rv, bv: bv_capped.clone(), bv_capped, valid }
    }

    /// Rolling standard deviation floored at `sigma_min`.
    pub fn sigma_step(&self, i: usize, sigma_min: f64) -> f64 {
        self.std[i].max(sigma_min)
    }
}

/// Sum of squared returns.
pub fn realized_variance(returns: &[f64]) -> f64 {
    returns.iter().map(|r| r * r).sum()
}

/// Lag-two bipower variation scaled so that it estimates the diffusive part
/// of [`realized_variance`].
pub fn bipower_variation(returns: &[f64]) -> f64 {
    let n = returns.len();
    if n < 3 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = (2..n).map(|j| returns[j].abs() * returns[j - 2].abs()).sum();
    PI / ((1.0 - 2.0 / nf) * 2.0) * s
}

/// Log-returns `ln(M_i / M_{i-1})`; entry 0 and any return touching a
/// missing or non-positive price are `None`.
pub fn log_returns(mid: &[f64], valid: &[bool]) -> Vec<Option<f64>> {
    let ok = |i: usize| valid.get(i).copied().unwrap_or(true) && mid[i].is_finite() && mid[i] > 0.0;
    (0..mid.len()).map(|i| (i > 0 && ok(i) && ok(i - 1)).then(|| (mid[i] / mid[i - 1]).ln())).collect()
}

/// Computes all rolling statistics over a mid-price series.
pub fn rolling_stats(mid: &[f64], valid: &[bool], window_n: usize) -> Result<RollingStats> {
    if window_n < 3 {
        return Err(Error::Config(format!("window must hold at least 3 returns, got {window_n}")));
    }
    let rets = log_returns(mid, valid);
    let n = mid.len();
    let mut out = RollingStats {
        window_n,
        mean: vec![f64::NAN; n],
        std: vec![f64::NAN; n],
        rv: vec![f64::NAN; n],
        bv: vec![f64::NAN; n],
        bv_capped: vec![f64::NAN; n],
        valid: vec![false; n],
    };
    let mut window = Vec::with_capacity(window_n);
    for i in window_n + 1..n {
        window.clear();
        window.extend(rets[i - window_n..i].iter().map_while(|r| *r));
        if window.len() != window_n {
            continue;
        }
        let nf = window_n as f64;
        let m = window.iter().sum::<f64>() / nf;
        let var = window.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (nf - 1.0);
        let rv = realized_variance(&window);
        let bv = bipower_variation(&window);
        out.mean[i] = m;
        out.std[i] = var.sqrt();
        out.rv[i] = rv;
        out.bv[i] = bv;
        out.bv_capped[i] = bv.min(rv);
        out.valid[i] = true;
    }
    Ok(out)
}

/// Moment constraints for the jump-diffusion at one grid point, all per
/// grid step and under a zero-drift assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DejdConstraints {
    /// Diffusive variance per step.
    pub sigma2_dt: f64,
    /// Jump variance per step, `λΔt (2p/η₁² + 2q/η₂²)`.
    pub jump_var_dt: f64,
    /// Observed mean log-return per step.
    pub mean_logret: f64,
}

impl DejdConstraints {
    /// Required jump mean per step, `λΔt (p/η₁ − q/η₂)`.
    pub fn jump_mean_dt(&self) -> f64 {
        self.mean_logret + 0.5 * self.sigma2_dt
    }
}

pub fn calibrate_dejd_constraints(stats: &RollingStats, i: usize) -> Option<DejdConstraints> {
    if !stats.valid.get(i).copied().unwrap_or(false) {
        return None;
    }
    let nf = stats.window_n as f64;
    let cap = stats.bv_capped[i];
    Some(DejdConstraints {
        sigma2_dt: cap / nf,
        jump_var_dt: ((stats.rv[i] - cap) / nf).max(0.0),
        mean_logret: stats.mean[i],
    })
}
