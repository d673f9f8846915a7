//! Double-exponential jump-diffusion: jump law, moments, the Lévy exponent
//! `G`, its positive roots and the first-passage Laplace transform.
//!
//! The log-price follows `X_t = μ̂ t + σ W_t + Σ_{i ≤ N_t} Y_i` with `N_t`
//! Poisson of rate λ and `Y` drawn from
//!
//! ```text
//! f(y) = p η₁ e^{-η₁ y} 1{y ≥ 0} + q η₂ e^{η₂ y} 1{y < 0}
//! ```

use crate::error::{Error, Result};
use crate::gbm::LogReturnMoments;
use crate::Side;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DejdParams {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub p: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl DejdParams {
    pub fn new(mu: f64, sigma: f64, lambda: f64, p: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let params = Self { mu, sigma, lambda, p, eta1, eta2 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.sigma, self.lambda, self.p, self.eta1, self.eta2].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain(format!("non-finite jump-diffusion parameters {self:?}")));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.lambda < 0.0 {
            return Err(Error::domain(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.eta1 > 2.0 && self.eta2 > 2.0) {
            return Err(Error::domain(format!("eta1 and eta2 must exceed 2, got ({}, {})", self.eta1, self.eta2)));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

/// Jump-size density.
pub fn dexp_density(y: f64, params: &DejdParams) -> f64 {
    if y >= 0.0 {
        params.p * params.eta1 * (-params.eta1 * y).exp()
    } else {
        params.q() * params.eta2 * (params.eta2 * y).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMoments {
    /// Mean of the log jump `Y`.
    pub ey: f64,
    pub vy: f64,
    /// Mean of the multiplicative jump `V = e^Y`.
    pub ev: f64,
    pub ev2: f64,
    pub vv: f64,
}

pub fn jump_moments(params: &DejdParams) -> JumpMoments {
    let (p, q, e1, e2) = (params.p, params.q(), params.eta1, params.eta2);
    let ey = p / e1 - q / e2;
    let vy = p * q * (1.0 / e1 + 1.0 / e2).powi(2) + p / (e1 * e1) + q / (e2 * e2);
    let ev = p * e1 / (e1 - 1.0) + q * e2 / (e2 + 1.0);
    let ev2 = p * e1 / (e1 - 2.0) + q * e2 / (e2 + 2.0);
    JumpMoments { ey, vy, ev, ev2, vv: ev2 - ev * ev }
}

/// First two moments of the jump product `∏_{i ≤ N_t} V_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonProductMoments {
    pub ep: f64,
    pub ep2: f64,
}

pub fn poisson_product_moments(params: &DejdParams, t: f64) -> PoissonProductMoments {
    let jm = jump_moments(params);
    PoissonProductMoments {
        ep: (t * params.lambda * (jm.ev - 1.0)).exp(),
        ep2: (t * params.lambda * (jm.ev2 - 1.0)).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessMoments {
    pub es: f64,
    pub vs: f64,
}

/// Mean and variance of `S_t` started at `s0`.
pub fn process_moments(params: &DejdParams, s0: f64, t: f64) -> ProcessMoments {
    let pp = poisson_product_moments(params, t);
    let growth = (params.mu * t).exp();
    ProcessMoments {
        es: s0 * growth * pp.ep,
        vs: s0 * s0 * growth * growth * ((params.sigma * params.sigma * t).exp() * pp.ep2 - pp.ep * pp.ep),
    }
}

/// Mean and variance of the log-return over `dt`.
pub fn logret_moments(params: &DejdParams, dt: f64) -> LogReturnMoments {
    let (p, q, e1, e2) = (params.p, params.q(), params.eta1, params.eta2);
    let s2 = params.sigma * params.sigma;
    LogReturnMoments {
        mean: (params.mu - 0.5 * s2) * dt + params.lambda * dt * (p / e1 - q / e2),
        var: s2 * dt + params.lambda * dt * (2.0 * p / (e1 * e1) + 2.0 * q / (e2 * e2)),
    }
}

/// Parameters of the log-process `X_t` used by `G` and the first-passage
/// transform. Unlike [`DejdParams`] the jump rates only need to be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsHat {
    pub mu_hat: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub p: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl ParamsHat {
    /// Log-process of an up-going price: `μ̂ = μ - σ²/2`.
    pub fn from_params(params: &DejdParams) -> Self {
        ParamsHat {
            mu_hat: params.mu - 0.5 * params.sigma * params.sigma,
            sigma: params.sigma,
            lambda: params.lambda,
            p: params.p,
            eta1: params.eta1,
            eta2: params.eta2,
        }
    }

    /// Pure diffusion with drift `mu_hat`; the jump fields are placeholders.
    pub fn diffusion(mu_hat: f64, sigma: f64) -> Self {
        ParamsHat { mu_hat, sigma, lambda: 0.0, p: 0.5, eta1: 1.0, eta2: 1.0 }
    }

    /// The mirrored process `-X_t`.
    pub fn reflected(&self) -> Self {
        ParamsHat {
            mu_hat: -self.mu_hat,
            sigma: self.sigma,
            lambda: self.lambda,
            p: 1.0 - self.p,
            eta1: self.eta2,
            eta2: self.eta1,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.lambda >= 0.0
            && self.p > 0.0
            && self.p < 1.0
            && self.eta1 > 0.0
            && self.eta2 > 0.0
            && self.mu_hat.is_finite()
            && self.lambda.is_finite()
            && self.eta1.is_finite()
            && self.eta2.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid log-process parameters {self:?}")))
        }
    }
}

/// Moment generating function of one jump, `E[e^{θY}]` for `θ ∈ (-η₂, η₁)`.
pub fn mgf_jump(theta: f64, params: &DejdParams) -> Result<f64> {
    if !(theta > -params.eta2 && theta < params.eta1) {
        return Err(Error::domain(format!("theta {theta} outside ({}, {})", -params.eta2, params.eta1)));
    }
    Ok(params.p * params.eta1 / (params.eta1 - theta) + params.q() * params.eta2 / (params.eta2 + theta))
}

/// `G(x) = x μ̂ + x²σ²/2 + λ (p η₁/(η₁ - x) + q η₂/(η₂ + x) - 1)`.
pub fn g_function(x: f64, ph: &ParamsHat) -> Result<f64> {
    if x == ph.eta1 || x == -ph.eta2 {
        return Err(Error::domain(format!("G has a pole at {x}")));
    }
    Ok(g_unchecked(x, ph))
}

// The jump term is written as p x/(η₁ - x) - q x/(η₂ + x), which equals the
// bracket above without the cancellation near x = 0.
fn g_unchecked(x: f64, ph: &ParamsHat) -> f64 {
    let jumps = ph.p * x / (ph.eta1 - x) - (1.0 - ph.p) * x / (ph.eta2 + x);
    x * ph.mu_hat + 0.5 * x * x * ph.sigma * ph.sigma + ph.lambda * jumps
}

/// The two positive roots of `G(x) = α`. `beta2` is `+∞` when λ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaRoots {
    pub beta1: f64,
    pub beta2: f64,
    /// `β₂ - η₁`, kept separately because β₂ can sit closer to the pole than
    /// one ulp of η₁.
    pub beta2_gap: f64,
}

const ROOT_MAX_ITER: usize = 200;

/// Positive root of the diffusive quadratic `x μ̂ + x²σ²/2 = α`.
pub fn diffusive_root(mu_hat: f64, sigma: f64, alpha: f64) -> f64 {
    let s2 = sigma * sigma;
    // conjugate form avoids cancellation when μ̂ > 0
    let disc = (mu_hat * mu_hat + 2.0 * alpha * s2).sqrt();
    if mu_hat > 0.0 {
        2.0 * alpha / (mu_hat + disc)
    } else {
        (disc - mu_hat) / s2
    }
}

pub fn find_beta_roots(ph: &ParamsHat, alpha: f64) -> Result<BetaRoots> {
    ph.check()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if ph.lambda == 0.0 {
        let beta1 = diffusive_root(ph.mu_hat, ph.sigma, alpha);
        return Ok(BetaRoots { beta1, beta2: f64::INFINITY, beta2_gap: f64::INFINITY });
    }
    let h = |x: f64| g_unchecked(x, ph) - alpha;
    let e1 = ph.eta1;

    let mut eps = 1e-9 * e1;
    let beta1 = loop {
        let (lo, hi) = (eps, e1 - eps);
        if h(lo) < 0.0 && h(hi) > 0.0 {
            break refine(&h, lo, hi);
        }
        eps *= 1e-3;
        if eps < e1 * f64::EPSILON {
            return Err(Error::solver(format!("cannot bracket the root below eta1 for {ph:?}, alpha {alpha}")));
        }
    };

    // Above the pole, solve for the gap δ = x - η₁ directly.
    let h2 = |delta: f64| g_above_pole(delta, ph) - alpha;
    let mut lo = 1e-9 * e1;
    while h2(lo) >= 0.0 {
        lo *= 1e-3;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::solver(format!("cannot bracket the root above eta1 for {ph:?}, alpha {alpha}")));
        }
    }
    let mut hi = 1.0f64.max(2.0 * lo);
    let mut doublings = 0;
    while h2(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::solver("upper bracket for the root above eta1 diverged"));
        }
    }
    let gap = refine(&h2, lo, hi);
    Ok(BetaRoots { beta1, beta2: e1 + gap, beta2_gap: gap })
}

/// `G(η₁ + δ)` for `δ > 0`, evaluated without forming `η₁ - x`.
pub fn g_above_pole(delta: f64, ph: &ParamsHat) -> f64 {
    let x = ph.eta1 + delta;
    let jumps = -ph.p * x / delta - (1.0 - ph.p) * x / (ph.eta2 + x);
    x * ph.mu_hat + 0.5 * x * x * ph.sigma * ph.sigma + ph.lambda * jumps
}

/// Bisects a bracket with `h(lo) < 0 < h(hi)` down to adjacent floats and
/// returns the end with the smaller residual.
fn refine<F: Fn(f64) -> f64>(h: &F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v == 0.0 {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if h(lo).abs() <= h(hi).abs() {
        lo
    } else {
        hi
    }
}

/// `E[exp(-α τ_b)]` for the first time `X_t` reaches level `b ≥ 0`.
pub fn dejd_hitting_laplace(ph: &ParamsHat, b: f64, alpha: f64) -> Result<f64> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("barrier level must be non-negative, got {b}")));
    }
    let roots = find_beta_roots(ph, alpha)?;
    Ok(laplace_from_roots(ph.eta1, &roots, b))
}

pub fn laplace_from_roots(eta1: f64, roots: &BetaRoots, b: f64) -> f64 {
    let BetaRoots { beta1: b1, beta2: b2, beta2_gap: gap } = *roots;
    if b2.is_infinite() {
        return (-b * b1).exp();
    }
    let denom = eta1 * (b2 - b1);
    let c1 = (eta1 - b1) * b2 / denom;
    let c2 = gap * b1 / denom;
    c1 * (-b * b1).exp() + c2 * (-b * b2).exp()
}

/// Maps a barrier at distance `d > 0` above (ask) or below (bid) `s0` to an
/// up-crossing problem for a log-process.
pub fn passage_transform(side: Side, params: &DejdParams, s0: f64, d: f64) -> Result<(ParamsHat, f64)> {
    if !(d > 0.0 && d.is_finite()) || !(s0 > 0.0) {
        return Err(Error::domain(format!("need s0 > 0 and d > 0, got ({s0}, {d})")));
    }
    let up = ParamsHat::from_params(params);
    match side {
        Side::Ask => Ok((up, (d / s0).ln_1p())),
        Side::Bid => {
            if d >= s0 {
                return Err(Error::domain(format!("bid distance {d} reaches below zero from {s0}")));
            }
            Ok((up.reflected(), -(-d / s0).ln_1p()))
        }
    }
}

/// Utility `d E[exp(-r τ)]` of an order `d` away from `s0` on `side`.
pub fn dejd_utility(side: Side, params: &DejdParams, s0: f64, d: f64, r: f64) -> Result<f64> {
    let (ph, z) = passage_transform(side, params, s0, d)?;
    Ok(d * dejd_hitting_laplace(&ph, z, r)?)
}
