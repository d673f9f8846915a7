use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Poisson, StandardNormal};

use crate::dejd::{DejdParams, ParamsHat};
use crate::error::{Error, Result};
use crate::gbm::GbmParams;

use super::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Gbm(GbmParams),
    Dejd(DejdParams),
}

impl Model {
    /// Parameters of `ln(S_t / S_0)`.
    pub fn log_params(&self) -> ParamsHat {
        match self {
            Model::Gbm(g) => ParamsHat::diffusion(g.mu - 0.5 * g.sigma * g.sigma, g.sigma),
            Model::Dejd(d) => ParamsHat::from_params(d),
        }
    }
}

/// A path request. `horizon` and `dt` are in the time unit of the model
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub model: Model,
    pub s0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// Simulated prices at every grid point and every jump instant. At a jump
/// instant the post-jump price is recorded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PricePath {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub is_jump: Vec<bool>,
}

impl PricePath {
    /// Grid points only.
    pub fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let idx = (0..self.times.len()).filter(|&i| !self.is_jump[i]);
        idx.map(|i| (self.times[i], self.prices[i])).unzip()
    }
}

/// Double-exponential jump size: `+Exp(η₁)` with probability `p`, otherwise
/// `-Exp(η₂)`.
pub fn sample_jump<R: Rng + ?Sized>(rng: &mut R, p: f64, eta1: f64, eta2: f64) -> f64 {
    let up = rng.random::<f64>() < p;
    let e: f64 = Exp1.sample(rng);
    if up {
        e / eta1
    } else {
        -e / eta2
    }
}

/// Exact increment of the log-process over `dt`.
pub fn sample_log_increment<R: Rng + ?Sized>(rng: &mut R, ph: &ParamsHat, dt: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let mut x = ph.mu_hat * dt + ph.sigma * dt.sqrt() * z;
    if ph.lambda > 0.0 {
        let n = Poisson::new(ph.lambda * dt).map(|d| d.sample(rng)).unwrap_or(0.0) as u64;
        for _ in 0..n {
            x += sample_jump(rng, ph.p, ph.eta1, ph.eta2);
        }
    }
    x
}

/// Jump arrival times of a Poisson process.
#[derive(Debug, Clone, Copy)]
pub struct JumpClock {
    exp: Option<Exp<f64>>,
}

impl JumpClock {
    pub fn new(lambda: f64) -> Self {
        Self { exp: (lambda > 0.0).then(|| Exp::new(lambda).ok()).flatten() }
    }

    /// Time of the next arrival after `t`, or `+∞` without jumps.
    pub fn next_after<R: Rng + ?Sized>(&self, rng: &mut R, t: f64) -> f64 {
        match &self.exp {
            Some(e) => t + e.sample(rng),
            None => f64::INFINITY,
        }
    }
}

pub fn simulate_path(spec: &PathSpec) -> Result<PricePath> {
    if !(spec.horizon > 0.0 && spec.dt > 0.0 && spec.s0 > 0.0) {
        return Err(Error::Config(format!(
            "path needs positive horizon, step and start price, got ({}, {}, {})",
            spec.horizon, spec.dt, spec.s0
        )));
    }
    let ph = spec.model.log_params();
    let mut rng = stream_rng(spec.seed, 0);
    let clock = JumpClock::new(ph.lambda);
    let diffuse = |rng: &mut rand_chacha::ChaCha8Rng, h: f64| {
        let z: f64 = StandardNormal.sample(rng);
        ph.mu_hat * h + ph.sigma * h.sqrt() * z
    };
    let steps = (spec.horizon / spec.dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = PricePath::default();
    out.times.push(0.0);
    out.prices.push(spec.s0);
    out.is_jump.push(false);
    let (mut t, mut x) = (0.0, 0.0);
    let mut next_jump = clock.next_after(&mut rng, 0.0);
    for k in 1..=steps {
        let tg = (k as f64 * spec.dt).min(spec.horizon);
        while next_jump < tg {
            x += diffuse(&mut rng, next_jump - t);
            x += sample_jump(&mut rng, ph.p, ph.eta1, ph.eta2);
            t = next_jump;
            out.times.push(t);
            out.prices.push(spec.s0 * x.exp());
            out.is_jump.push(true);
            next_jump = clock.next_after(&mut rng, t);
        }
        x += diffuse(&mut rng, tg - t);
        t = tg;
        out.times.push(t);
        out.prices.push(spec.s0 * x.exp());
        out.is_jump.push(false);
    }
    Ok(out)
}
