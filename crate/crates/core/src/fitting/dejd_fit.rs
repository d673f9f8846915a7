use crate::dejd::{dejd_utility, DejdParams};
use crate::error::Result;
use crate::estimators::{calibrate_dejd_constraints, RollingStats};
use crate::ingest::ResampledSeries;
use crate::numeric::{nelder_mead, NelderMeadConfig};
use crate::Side;

use super::{check_lengths, rel_step, select_distance, FitConfig, FitModel, FitResult, PointParams, SideFit};

/// Up-jump probability and jumps per step `(p, λΔt)` that reproduce the
/// per-step jump variance `jump_var_dt` and jump mean `jump_mean_dt` for the
/// given jump rates. `None` when no admissible pair exists.
pub fn solve_jump_params(eta1: f64, eta2: f64, jump_var_dt: f64, jump_mean_dt: f64) -> Option<(f64, f64)> {
    if !(jump_var_dt > 0.0) {
        return None;
    }
    let (a, b) = (1.0 / eta1, 1.0 / eta2);
    let (j, m) = (jump_var_dt, jump_mean_dt);
    let p = (j * b + 2.0 * m * b * b) / (j * (a + b) + 2.0 * m * (b * b - a * a));
    if !(p > 0.0 && p < 1.0) {
        return None;
    }
    let lambda_dt = j / (2.0 * p * a * a + 2.0 * (1.0 - p) * b * b);
    (lambda_dt.is_finite() && lambda_dt >= 0.0).then_some((p, lambda_dt))
}

/// Closest point to the moment match when the mean is out of reach: `p` is
/// clamped into `[P_EDGE, 1 - P_EDGE]` and the jump rate still matches the
/// variance.
pub fn project_jump_params(eta1: f64, eta2: f64, jump_var_dt: f64, jump_mean_dt: f64) -> Option<(f64, f64)> {
    if !(jump_var_dt > 0.0) {
        return None;
    }
    if let Some(sol) = solve_jump_params(eta1, eta2, jump_var_dt, jump_mean_dt) {
        return Some(sol);
    }
    let (a, b) = (1.0 / eta1, 1.0 / eta2);
    // sign of the residual mean picks the edge
    let p = if jump_mean_dt > 0.0 { 1.0 - P_EDGE } else { P_EDGE };
    let lambda_dt = jump_var_dt / (2.0 * p * a * a + 2.0 * (1.0 - p) * b * b);
    lambda_dt.is_finite().then_some((p, lambda_dt))
}

pub const P_EDGE: f64 = 1e-3;

/// Parameters and utilities from the previous point, the anchor for both
/// smoothness terms.
#[derive(Debug, Clone, Copy)]
struct State {
    r_ask: f64,
    r_bid: f64,
    u_ask: f64,
    u_bid: f64,
    lambda: f64,
    p: f64,
    eta1: f64,
    eta2: f64,
}

struct Point {
    sigma: f64,
    jump_var_dt: f64,
    jump_mean_dt: f64,
    ask: (f64, f64),
    bid: (f64, f64),
}

const INFEASIBLE: f64 = 1e3;

struct Problem<'a> {
    pt: &'a Point,
    prev: State,
    dt: f64,
    config: &'a FitConfig,
    continuity: bool,
    /// Jump rates are only anchored while jumps are active; with zero
    /// intensity they do not enter the utility.
    eta_anchored: bool,
}

impl Problem<'_> {
    fn etas(&self, y: &[f64]) -> (f64, f64) {
        let eta = |w: f64, prev: f64| {
            if self.eta_anchored {
                prev + self.config.eps.sqrt() * w.tanh()
            } else {
                2.0 + w.exp()
            }
        };
        let e1 = eta(y[2], self.prev.eta1);
        let e2 = if self.config.strict.equal_etas { e1 } else { eta(y[3], self.prev.eta2) };
        (e1, e2)
    }

    fn rates(&self, y: &[f64]) -> (f64, f64) {
        (self.config.r_min + y[0].exp(), self.config.r_min + y[1].exp())
    }

    /// Process parameters for a candidate, or a positive infeasibility
    /// measure.
    fn params(&self, e1: f64, e2: f64) -> std::result::Result<DejdParams, f64> {
        if !(e1 > 2.0 && e2 > 2.0) {
            return Err((2.0 - e1).max(0.0) + (2.0 - e2).max(0.0) + 1e-12);
        }
        let (p, lambda) = if self.pt.jump_var_dt > 0.0 {
            match project_jump_params(e1, e2, self.pt.jump_var_dt, self.pt.jump_mean_dt) {
                Some((p, ldt)) => (p, ldt / self.dt),
                None => return Err(1.0),
            }
        } else {
            (self.prev.p, 0.0)
        };
        Ok(DejdParams { mu: 0.0, sigma: self.pt.sigma, lambda, p, eta1: e1, eta2: e2 })
    }

    fn evaluate(&self, y: &[f64]) -> Option<(State, f64)> {
        let (e1, e2) = self.etas(y);
        let (r_ask, r_bid) = self.rates(y);
        let params = self.params(e1, e2).ok()?;
        let u_ask = dejd_utility(Side::Ask, &params, self.pt.ask.0, self.pt.ask.1, r_ask).ok()?;
        let u_bid = dejd_utility(Side::Bid, &params, self.pt.bid.0, self.pt.bid.1, r_bid).ok()?;
        if !(u_ask > 0.0 && u_bid > 0.0) {
            return None;
        }
        let err = (rel_step(self.prev.u_ask, u_ask)
            + rel_step(self.prev.u_bid, u_bid)
            + rel_step(self.prev.r_ask, r_ask)
            + rel_step(self.prev.r_bid, r_bid))
            / 4.0;
        let mut excess = 0.0;
        if self.continuity && self.config.strict.lambda_continuity {
            excess += ((params.lambda - self.prev.lambda).powi(2) - self.config.eps).max(0.0);
        }
        if self.continuity && self.config.strict.p_continuity {
            excess += ((params.p - self.prev.p).powi(2) - self.config.eps).max(0.0);
        }
        let state = State { r_ask, r_bid, u_ask, u_bid, lambda: params.lambda, p: params.p, eta1: e1, eta2: e2 };
        Some((state, if excess > 0.0 { INFEASIBLE + excess } else { err }))
    }

    fn objective(&self, y: &[f64]) -> f64 {
        match self.evaluate(y) {
            Some((_, v)) => v,
            None => {
                let (e1, e2) = self.etas(y);
                INFEASIBLE + self.params(e1, e2).err().unwrap_or(1.0) + 1.0
            }
        }
    }

    /// Unconstrained coordinates of a parameter guess.
    fn encode(&self, r_ask: f64, r_bid: f64, e1: f64, e2: f64) -> Vec<f64> {
        let r = |v: f64| (v - self.config.r_min).max(1e-12).ln();
        let w = |e: f64, prev: f64| {
            if self.eta_anchored {
                ((e - prev) / self.config.eps.sqrt()).clamp(-0.999, 0.999).atanh()
            } else {
                (e - 2.0).max(1e-9).ln()
            }
        };
        vec![r(r_ask), r(r_bid), w(e1, self.prev.eta1), w(e2, self.prev.eta2)]
    }

    fn solve(&self) -> Option<State> {
        let prev = self.prev;
        let mut starts = vec![self.encode(prev.r_ask, prev.r_bid, prev.eta1, prev.eta2)];
        if self.pt.jump_var_dt > 0.0 && prev.lambda > 0.0 {
            let eta = (2.0 * prev.lambda * self.dt / self.pt.jump_var_dt).sqrt();
            starts.push(self.encode(prev.r_ask, prev.r_bid, eta, eta));
        }
        let mid = 0.5 * (prev.eta1 + prev.eta2);
        starts.push(self.encode(self.config.r0, self.config.r0, mid, mid));
        if !self.eta_anchored && self.pt.jump_var_dt > 0.0 {
            let eta = default_eta(self.pt.jump_var_dt);
            starts.push(self.encode(prev.r_ask, prev.r_bid, eta, eta));
        }

        let nm = NelderMeadConfig { max_evals: self.config.max_iter, ftol: 1e-18, xtol: 1e-10 };
        let scale = [0.5, 0.5, 0.5, 0.5];
        let mut best: Option<(State, f64)> = None;
        for s in &starts {
            let res = nelder_mead(|y| self.objective(y), s, &scale, &nm);
            if let Some((state, v)) = self.evaluate(&res.x) {
                if v < INFEASIBLE && best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                    best = Some((state, v));
                }
            }
        }
        best.map(|(s, _)| s)
    }
}

/// Per-point joint fit of both sides' rates and the jump parameters.
///
/// At each point the diffusive variance and the jump variance and mean are
/// pinned by the rolling estimators, which leaves `(r_ask, r_bid, η₁, η₂)`
/// free. The objective averages the relative changes of both utilities and
/// both rates against the previous point. Jump rates may move by at most
/// `√eps` per point.
pub fn fit_dejd(series: &ResampledSeries, stats: &RollingStats, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    check_lengths(series, stats)?;
    let n = series.len();
    let dt = config.dt(series);
    let points: Vec<Option<Point>> = (0..n)
        .map(|i| {
            let c = calibrate_dejd_constraints(stats, i)?;
            let (sa, da) = select_distance(series, Side::Ask, i, config.level)?;
            let (sb, db) = select_distance(series, Side::Bid, i, config.level)?;
            if da <= 0.0 || db >= 0.0 {
                return None;
            }
            let sigma = c.sigma2_dt.sqrt().max(config.sigma_min) / dt.sqrt();
            Some(Point {
                sigma,
                jump_var_dt: c.jump_var_dt,
                jump_mean_dt: c.jump_mean_dt(),
                ask: (sa, da),
                bid: (sb, -db),
            })
        })
        .collect();

    let mut result = FitResult {
        model: FitModel::Dejd,
        timestamps_ms: series.timestamps_ms.clone(),
        dt,
        bid: SideFit::new(n),
        ask: SideFit::new(n),
        params: vec![None; n],
        failures: 0,
    };
    let Some(i0) = points.iter().position(Option::is_some) else {
        return Ok(result);
    };
    let Some(mut prev) = initial_state(points[i0].as_ref().expect("found"), dt, config) else {
        result.failures += 2;
        return Ok(result);
    };

    for (i, pt) in points.iter().enumerate().skip(i0) {
        let Some(pt) = pt else { continue };
        result.ask.d[i] = pt.ask.1;
        result.ask.s0[i] = pt.ask.0;
        result.bid.d[i] = -pt.bid.1;
        result.bid.s0[i] = pt.bid.0;
        let continuity = i > i0;
        let problem = Problem { pt, prev, dt, config, continuity, eta_anchored: continuity && prev.lambda > 0.0 };
        match problem.solve() {
            Some(state) => {
                for (side, r, u) in [(Side::Ask, state.r_ask, state.u_ask), (Side::Bid, state.r_bid, state.u_bid)] {
                    let s = result.side_mut(side);
                    s.r[i] = r;
                    s.u[i] = u;
                    s.valid[i] = true;
                }
                result.params[i] = Some(PointParams {
                    mu: 0.0,
                    sigma: pt.sigma,
                    lambda: state.lambda,
                    p: state.p,
                    eta1: state.eta1,
                    eta2: state.eta2,
                });
                prev = state;
            }
            None => {
                result.failures += 2;
                log::debug!("jump-diffusion fit failed at point {i}");
            }
        }
    }
    Ok(result)
}

/// Jump rate that puts one jump in twenty steps for jump variance `j`.
fn default_eta(j: f64) -> f64 {
    (0.1 / j).sqrt().max(2.5)
}

/// Starting state at the first fitted point: rates `r0`, jump rates from
/// the config or a default that puts one jump in twenty steps, and
/// utilities from `u0` or the model at `r0`.
fn initial_state(pt: &Point, dt: f64, config: &FitConfig) -> Option<State> {
    let (eta1, eta2) = config.eta0.unwrap_or_else(|| {
        let eta = if pt.jump_var_dt > 0.0 { default_eta(pt.jump_var_dt) } else { 100.0 };
        (eta, eta)
    });
    let (p, lambda) = match project_jump_params(eta1, eta2, pt.jump_var_dt, pt.jump_mean_dt) {
        Some((p, ldt)) => (p, ldt / dt),
        None => (0.5, 0.0),
    };
    let params = DejdParams { mu: 0.0, sigma: pt.sigma, lambda, p, eta1, eta2 };
    let (u_ask, u_bid) = match config.u0 {
        Some(u) => (u, u),
        None => (
            dejd_utility(Side::Ask, &params, pt.ask.0, pt.ask.1, config.r0).ok()?,
            dejd_utility(Side::Bid, &params, pt.bid.0, pt.bid.1, config.r0).ok()?,
        ),
    };
    Some(State { r_ask: config.r0, r_bid: config.r0, u_ask, u_bid, lambda, p, eta1, eta2 })
}
