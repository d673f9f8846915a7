use crate::stats::{fixed_effects_slope, ols, Regression};
use crate::Side;

use super::FitResult;

/// One fitted rate against its risk-adjusted distance
/// `z = ln((S + D) / S) / σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZrPair {
    pub ts_ms: i64,
    pub side: Side,
    pub z: f64,
    pub r: f64,
    pub log10_z: f64,
    pub log10_r: f64,
    /// Index of the constant-utility segment the point belongs to.
    pub segment: usize,
}

/// Power-law fit `r ∝ |z|^{-α}` within one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFit {
    pub side: Side,
    pub segment: usize,
    pub n: usize,
    pub alpha: f64,
    pub t_stat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub pairs: Vec<ZrPair>,
    pub segments: Vec<SegmentFit>,
    /// Slope of `log10 r` on `log10 |z|` pooled over segments, each with its
    /// own intercept.
    pub pooled: Option<Regression>,
    /// `-pooled.slope`, NaN when there is nothing to regress.
    pub power_law_alpha: f64,
}

/// Regression of `log10 r` on `log10 |z|`.
pub fn power_law_fit(z: &[f64], r: &[f64]) -> Option<Regression> {
    let x: Vec<f64> = z.iter().map(|v| v.abs().log10()).collect();
    let y: Vec<f64> = r.iter().map(|v| v.log10()).collect();
    ols(&x, &y)
}

/// Splits each side's valid points into segments of roughly constant
/// utility and fits the power law inside each.
///
/// A segment ends at a gap or where the utility moves by more than
/// `u_jump` relative to the previous point.
pub fn diagnostics(fit: &FitResult, u_jump: f64) -> Diagnostics {
    let mut pairs = Vec::new();
    let mut segment = 0usize;
    for side in Side::BOTH {
        let s = fit.side(side);
        let mut prev_u: Option<f64> = None;
        for i in 0..fit.len() {
            let sigma = fit.params[i].map(|p| p.sigma);
            let (Some(sigma), true) = (sigma, s.valid[i]) else {
                if prev_u.take().is_some() {
                    segment += 1;
                }
                continue;
            };
            let z = (s.d[i] / s.s0[i]).ln_1p() / sigma;
            if !(z != 0.0 && z.is_finite() && s.r[i] > 0.0) {
                continue;
            }
            if let Some(pu) = prev_u {
                if ((s.u[i] - pu) / pu).abs() > u_jump {
                    segment += 1;
                }
            }
            prev_u = Some(s.u[i]);
            pairs.push(ZrPair {
                ts_ms: fit.timestamps_ms[i],
                side,
                z,
                r: s.r[i],
                log10_z: z.abs().log10(),
                log10_r: s.r[i].log10(),
                segment,
            });
        }
        segment += 1;
    }

    let mut segments = Vec::new();
    let mut groups = Vec::new();
    let mut k = 0;
    while k < pairs.len() {
        let mut end = k;
        while end < pairs.len() && pairs[end].segment == pairs[k].segment {
            end += 1;
        }
        let seg = &pairs[k..end];
        let x: Vec<f64> = seg.iter().map(|p| p.log10_z).collect();
        let y: Vec<f64> = seg.iter().map(|p| p.log10_r).collect();
        if let Some(reg) = ols(&x, &y) {
            segments.push(SegmentFit {
                side: seg[0].side,
                segment: seg[0].segment,
                n: seg.len(),
                alpha: -reg.slope,
                t_stat: reg.t_stat,
            });
        }
        if seg.len() >= 2 {
            groups.push((x, y));
        }
        k = end;
    }
    let pooled = fixed_effects_slope(&groups);
    let power_law_alpha = pooled.map_or(f64::NAN, |r| -r.slope);
    Diagnostics { pairs, segments, pooled, power_law_alpha }
}
