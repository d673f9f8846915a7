use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};
use rayon::prelude::*;

use crate::dejd::ParamsHat;
use crate::error::{Error, Result};
use crate::stats::CompensatedSum;

use super::path::{sample_jump, JumpClock};
use super::rng::stream_rng;

/// How the diffusive part is checked for barrier crossings between jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Monitoring {
    /// Check only on a grid of the given step. Misses crossings that
    /// happen and revert between grid points.
    Discrete { step: f64 },
    /// Exact crossing detection from the Brownian-bridge crossing
    /// probability, with the crossing time drawn from its conditional law.
    BrownianBridge,
}

/// Monte-Carlo request for `E[exp(-r τ) 1{τ ≤ t_max}]`, where `τ` is the
/// first time the log-process reaches `barrier` (signed, relative to its
/// start at zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageSpec {
    pub process: ParamsHat,
    pub barrier: f64,
    pub r: f64,
    pub n_paths: usize,
    pub t_max: f64,
    pub seed: u64,
    pub monitoring: Monitoring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassageEstimate {
    pub mean_discount: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub t_max: f64,
}

/// Horizon beyond which the discount factor is below `1e-7`.
pub fn default_t_max(r: f64) -> f64 {
    1e7f64.ln() / r
}

const CHUNK: usize = 4096;

pub fn mc_first_passage(spec: &PassageSpec) -> Result<FirstPassageEstimate> {
    if !(spec.r > 0.0) || spec.n_paths == 0 || !(spec.t_max > 0.0) {
        return Err(Error::Config(format!(
            "need r > 0, n_paths > 0 and t_max > 0, got ({}, {}, {})",
            spec.r, spec.n_paths, spec.t_max
        )));
    }
    if (-spec.r * spec.t_max).exp() >= 1e-6 {
        return Err(Error::Config(format!("t_max {} too short for r {}", spec.t_max, spec.r)));
    }
    if let Monitoring::Discrete { step } = spec.monitoring {
        if !(step > 0.0) {
            return Err(Error::Config(format!("monitoring step must be positive, got {step}")));
        }
    }
    if spec.barrier == 0.0 {
        return Ok(FirstPassageEstimate {
            mean_discount: 1.0,
            std_error: 0.0,
            n_paths: spec.n_paths,
            t_max: spec.t_max,
        });
    }
    let (process, barrier) =
        if spec.barrier > 0.0 { (spec.process, spec.barrier) } else { (spec.process.reflected(), -spec.barrier) };
    let walker = Walker { ph: process, b: barrier, r: spec.r, t_max: spec.t_max, monitoring: spec.monitoring };

    let n_chunks = spec.n_paths.div_ceil(CHUNK);
    let partials: Vec<(CompensatedSum, CompensatedSum)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let (mut s, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
            for path in c * CHUNK..((c + 1) * CHUNK).min(spec.n_paths) {
                let mut rng = stream_rng(spec.seed, path as u64);
                let v = walker.run(&mut rng);
                s.add(v);
                s2.add(v * v);
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
    for (a, b) in &partials {
        s.merge(a);
        s2.merge(b);
    }
    let n = spec.n_paths as f64;
    let mean = s.value() / n;
    let var = if spec.n_paths > 1 { ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(FirstPassageEstimate {
        mean_discount: mean,
        std_error: (var / n).sqrt(),
        n_paths: spec.n_paths,
        t_max: spec.t_max,
    })
}

struct Walker {
    ph: ParamsHat,
    b: f64,
    r: f64,
    t_max: f64,
    monitoring: Monitoring,
}

impl Walker {
    /// Discount factor of one path, zero if the barrier is not reached by
    /// `t_max`.
    fn run(&self, rng: &mut ChaCha8Rng) -> f64 {
        let clock = JumpClock::new(self.ph.lambda);
        let (mut t, mut x) = (0.0, 0.0);
        let mut next_jump = clock.next_after(rng, 0.0);
        loop {
            let seg_end = next_jump.min(self.t_max);
            if let Some(tau) = self.diffuse(rng, t, &mut x, seg_end) {
                return (-self.r * tau).exp();
            }
            t = seg_end;
            if t >= self.t_max {
                return 0.0;
            }
            x += sample_jump(rng, self.ph.p, self.ph.eta1, self.ph.eta2);
            if x >= self.b {
                return (-self.r * t).exp();
            }
            next_jump = clock.next_after(rng, t);
        }
    }

    fn step(&self, rng: &mut ChaCha8Rng, x: f64, h: f64) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        x + self.ph.mu_hat * h + self.ph.sigma * h.sqrt() * z
    }

    /// Moves `x` from `t0` to `t1`; returns the crossing time if the barrier
    /// is hit on the way.
    fn diffuse(&self, rng: &mut ChaCha8Rng, t0: f64, x: &mut f64, t1: f64) -> Option<f64> {
        let span = t1 - t0;
        if span <= 0.0 {
            return None;
        }
        match self.monitoring {
            Monitoring::BrownianBridge => {
                let x1 = self.step(rng, *x, span);
                if x1 >= self.b || rng.random::<f64>() < self.bridge_cross_prob(*x, x1, span) {
                    return Some(self.locate(rng, t0, *x, t1, x1));
                }
                *x = x1;
                None
            }
            Monitoring::Discrete { step } => {
                let n = (span / step).ceil().max(1.0);
                let h = span / n;
                for k in 1..=n as u64 {
                    *x = self.step(rng, *x, h);
                    if *x >= self.b {
                        return Some(t0 + k as f64 * h);
                    }
                }
                None
            }
        }
    }

    /// Probability that a Brownian bridge from `x0` to `x1` (both below the
    /// barrier) over time `h` touches it.
    fn bridge_cross_prob(&self, x0: f64, x1: f64, h: f64) -> f64 {
        if x0 >= self.b || x1 >= self.b {
            return 1.0;
        }
        (-2.0 * (self.b - x0) * (self.b - x1) / (self.ph.sigma * self.ph.sigma * h)).exp()
    }

    /// Samples the first crossing time inside `[t0, t1]` given that the
    /// bridge from `x0` to `x1` crosses.
    ///
    /// Reflecting the path after the crossing turns an endpoint below the
    /// barrier into one above it without changing the crossing time. For a
    /// bridge ending above the barrier, `u = t / (h - t)` is inverse Gaussian
    /// with mean `y / w` and shape `y² / h`, where `y` and `w` are the
    /// standardised distances from the barrier to the two endpoints.
    fn locate(&self, rng: &mut ChaCha8Rng, t0: f64, x0: f64, t1: f64, x1: f64) -> f64 {
        let h = t1 - t0;
        let y = (self.b - x0) / self.ph.sigma;
        if y <= 0.0 {
            return t0;
        }
        let end = if x1 >= self.b { x1 } else { 2.0 * self.b - x1 };
        let w = (end - self.b) / self.ph.sigma;
        let ig = if w > 0.0 { InverseGaussian::new(y / w, y * y / h).ok() } else { None };
        let u = match ig {
            Some(d) => d.sample(rng),
            None => {
                // w = 0: the one-sided stable law y² / (h Z²)
                let z: f64 = StandardNormal.sample(rng);
                y * y / (h * z * z)
            }
        };
        t0 + h / (1.0 + 1.0 / u)
    }
}
