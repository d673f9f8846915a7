//! Small deterministic solvers: bisection, golden-section search and a
//! bounded-free Nelder-Mead simplex.

use crate::error::{Error, Result};

/// Finds a sign change of `f` in `[lo, hi]` by bisection.
///
/// Stops when the bracket is narrower than `xtol` or after `max_iter`
/// halvings, returning whichever end of the final bracket has the smaller
/// `|f|`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::solver(format!("no sign change on [{lo}, {hi}] (f = {flo}, {fhi})")));
    }
    let mut fh = fhi;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fh = fm;
        }
    }
    Ok(if flo.abs() <= fh.abs() { lo } else { hi })
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimises a scalar function on `[lo, ∞)`.
///
/// The upper end starts at `hi` and doubles while the objective is still
/// falling there. A log-spaced scan then picks the best cell, which is
/// refined by golden-section search. The result does not depend on any
/// starting guess.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::solver(format!("bad search interval [{lo}, {hi}]")));
    }
    let fv = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut hi = hi;
    for _ in 0..60 {
        let (f1, f2) = (fv(hi * 0.5), fv(hi));
        if f2 >= f1 {
            break;
        }
        hi *= 2.0;
    }
    const CELLS: usize = 64;
    let ratio = (hi / lo).ln() / CELLS as f64;
    let grid: Vec<f64> = (0..=CELLS).map(|k| lo * (ratio * k as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| fv(x)).collect();
    let best = (0..=CELLS).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).expect("non-empty grid");
    if !vals[best].is_finite() {
        return Err(Error::solver("objective is not finite anywhere on the search grid"));
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(CELLS)];
    let (x, fx) = golden_section(fv, a, b, tol, 400);
    if fx <= vals[best] {
        Ok((x, fx))
    } else {
        Ok((grid[best], vals[best]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub ftol: f64,
    /// Stop once the simplex diameter falls below this.
    pub xtol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 4000, ftol: 1e-14, xtol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimisation from `x0` with initial edge lengths
/// `scale`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], scale: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult {
    let n = x0.len();
    let fv = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale[i];
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| fv(x)).collect();
    let mut evals = n + 1;
    let mut converged = false;
    while evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let diam = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (vals[0].is_finite() && spread <= cfg.ftol) || diam <= cfg.xtol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect() };

        let xr = along(-1.0);
        let fr = fv(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = fv(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = fv(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = fv(&x);
            (x, v)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = simplex[i].iter().zip(&best).map(|(x, b)| b + 0.5 * (x - b)).collect();
            vals[i] = fv(&simplex[i]);
        }
        evals += n;
    }
    let ibest = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    NelderMeadResult { x: simplex[ibest].clone(), fx: vals[ibest], evals, converged }
}
