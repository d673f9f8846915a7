use crate::error::Result;
use crate::estimators::RollingStats;
use crate::gbm::{bm_hitting_laplace, GbmParams};
use crate::ingest::ResampledSeries;
use crate::numeric::minimize_scalar;
use crate::Side;

use super::{check_lengths, rel_step, select_distance, FitConfig, FitModel, FitResult, PointParams, SideFit};

/// Diffusion parameters implied by the rolling mean and standard deviation.
pub(crate) fn gbm_params_at(stats: &RollingStats, i: usize, dt: f64, sigma_min: f64) -> Option<GbmParams> {
    if !stats.valid[i] {
        return None;
    }
    let sigma = stats.sigma_step(i, sigma_min) / dt.sqrt();
    let mu = stats.mean[i] / dt + 0.5 * sigma * sigma;
    Some(GbmParams { mu, sigma })
}

fn utility(params: &GbmParams, s0: f64, d: f64, r: f64) -> f64 {
    let z = (d / s0).ln_1p() / params.sigma;
    d.abs() * bm_hitting_laplace(params.mu_hat(), z, r)
}

struct Input {
    params: GbmParams,
    s0: f64,
    d: f64,
}

/// Fits one book side by blocks of `config.steps` points.
///
/// Each block gets a single rate that minimises the relative utility
/// changes along the chain formed by the previous block's last utility and
/// the block's own utilities.
pub fn fit_gbm_side(
    series: &ResampledSeries,
    stats: &RollingStats,
    side: Side,
    config: &FitConfig,
) -> Result<(SideFit, usize)> {
    config.validate()?;
    check_lengths(series, stats)?;
    let n = series.len();
    let dt = config.dt(series);
    let inputs: Vec<Option<Input>> = (0..n)
        .map(|i| {
            let params = gbm_params_at(stats, i, dt, config.sigma_min)?;
            let (s0, d) = select_distance(series, side, i, config.level)?;
            Some(Input { params, s0, d })
        })
        .collect();

    let mut fit = SideFit::new(n);
    let mut failures = 0;
    let Some(i0) = inputs.iter().position(Option::is_some) else {
        return Ok((fit, failures));
    };
    let first = inputs[i0].as_ref().expect("position found a point");
    let mut carried = config.u0.unwrap_or_else(|| utility(&first.params, first.s0, first.d, config.r0));
    fit.u[i0] = carried;
    fit.d[i0] = first.d;
    fit.s0[i0] = first.s0;

    let mut start = i0;
    while start + 1 < n {
        let end = (start + config.steps).min(n - 1);
        let block: Vec<(usize, &Input)> =
            (start + 1..=end).filter_map(|j| inputs[j].as_ref().map(|inp| (j, inp))).collect();
        start = end;
        if block.is_empty() {
            continue;
        }
        let error = |r: f64| {
            let mut prev = carried;
            let mut e = 0.0;
            for (_, inp) in &block {
                let u = utility(&inp.params, inp.s0, inp.d, r);
                e += rel_step(prev, u);
                prev = u;
            }
            e
        };
        let solved = minimize_scalar(error, config.r_min, 1.0, config.delta).ok().and_then(|(r, _)| {
            let us: Vec<f64> = block.iter().map(|(_, inp)| utility(&inp.params, inp.s0, inp.d, r)).collect();
            us.iter().all(|u| u.is_finite() && *u > 0.0).then_some((r, us))
        });
        match solved {
            Some((r, us)) => {
                for ((j, inp), u) in block.iter().zip(&us) {
                    fit.r[*j] = r;
                    fit.u[*j] = *u;
                    fit.d[*j] = inp.d;
                    fit.s0[*j] = inp.s0;
                    fit.valid[*j] = true;
                }
                carried = *us.last().expect("non-empty block");
            }
            None => {
                failures += block.len();
                for (j, inp) in &block {
                    fit.d[*j] = inp.d;
                    fit.s0[*j] = inp.s0;
                }
            }
        }
    }
    Ok((fit, failures))
}

/// Fits both sides with the diffusion model.
pub fn fit_gbm(series: &ResampledSeries, stats: &RollingStats, config: &FitConfig) -> Result<FitResult> {
    let (bid, fb) = fit_gbm_side(series, stats, Side::Bid, config)?;
    let (ask, fa) = fit_gbm_side(series, stats, Side::Ask, config)?;
    let dt = config.dt(series);
    let params = (0..series.len())
        .map(|i| {
            gbm_params_at(stats, i, dt, config.sigma_min).map(|g| PointParams {
                mu: g.mu,
                sigma: g.sigma,
                lambda: 0.0,
                p: f64::NAN,
                eta1: f64::NAN,
                eta2: f64::NAN,
            })
        })
        .collect();
    Ok(FitResult {
        model: FitModel::Gbm,
        timestamps_ms: series.timestamps_ms.clone(),
        dt,
        bid,
        ask,
        params,
        failures: fb + fa,
    })
}
