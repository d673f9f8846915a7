use crate::error::{Error, Result};
use crate::estimators::RollingStats;
use crate::gbm::{implied_sigma, HittingSpec};
use crate::ingest::ResampledSeries;
use crate::Side;

/// Observed utilities indexed `[grid point][level]`; NaN marks a gap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservedUtilities {
    pub bid: Vec<Vec<f64>>,
    pub ask: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmileTarget {
    /// The same utility at every level.
    Constant(f64),
    Observed(ObservedUtilities),
}

/// Drift assumed when inverting for volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmileDrift {
    #[default]
    Zero,
    /// `μ` from the rolling mean and standard deviation.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileConfig {
    pub r: f64,
    pub target: SmileTarget,
    pub drift: SmileDrift,
    /// Grid step in model time units.
    pub dt: f64,
}

impl Default for SmileConfig {
    fn default() -> Self {
        Self { r: 0.5, target: SmileTarget::Constant(0.2355), drift: SmileDrift::Zero, dt: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    /// `(S + D) / S`.
    pub moneyness: f64,
    pub sigma: f64,
    pub side: Side,
    pub level: usize,
    pub ts_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmileResult {
    pub points: Vec<SmilePoint>,
    /// Level quotes where no volatility matches the target.
    pub skipped: usize,
}

/// Implied diffusion volatility at every quoted level of every valid point.
pub fn extract_smile(series: &ResampledSeries, stats: &RollingStats, config: &SmileConfig) -> Result<SmileResult> {
    if !(config.r > 0.0) {
        return Err(Error::Config(format!("smile rate must be positive, got {}", config.r)));
    }
    if let SmileTarget::Constant(c) = config.target {
        if !(c > 0.0) {
            return Err(Error::Config(format!("smile utility must be positive, got {c}")));
        }
    }
    let mut out = SmileResult::default();
    for i in 0..series.len() {
        let mu = match config.drift {
            SmileDrift::Zero => 0.0,
            SmileDrift::Estimated => {
                if !stats.valid.get(i).copied().unwrap_or(false) {
                    continue;
                }
                (stats.mean[i] + 0.5 * stats.std[i] * stats.std[i]) / config.dt
            }
        };
        for side in Side::BOTH {
            for level in 0..series.depth() {
                let (Some(s0), Some(d)) = (series.start(side, i), series.distance(side, i, level)) else {
                    continue;
                };
                if d == 0.0 {
                    continue;
                }
                let c = match &config.target {
                    SmileTarget::Constant(c) => *c,
                    SmileTarget::Observed(obs) => {
                        let table = match side {
                            Side::Bid => &obs.bid,
                            Side::Ask => &obs.ask,
                        };
                        match table.get(i).and_then(|row| row.get(level)) {
                            Some(&c) if c.is_finite() => c,
                            _ => continue,
                        }
                    }
                };
                let solved = HittingSpec::new(s0, d).and_then(|spec| implied_sigma(&spec, mu, config.r, c));
                match solved {
                    Ok(sigma) => out.points.push(SmilePoint {
                        moneyness: (s0 + d) / s0,
                        sigma,
                        side,
                        level,
                        ts_ms: series.timestamps_ms[i],
                    }),
                    Err(_) => out.skipped += 1,
                }
            }
        }
    }
    Ok(out)
}
