//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! `ACCEPTANCE_ONLY=2,7` restricts the run to the listed criteria.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use lobsmile::dejd::{
    dejd_hitting_laplace, dejd_utility, diffusive_root, find_beta_roots, g_above_pole, g_function, jump_moments,
    logret_moments, poisson_product_moments, process_moments, DejdParams, ParamsHat,
};
use lobsmile::estimators::{bipower_variation, log_returns, realized_variance, rolling_stats, RollingStats};
use lobsmile::fitting::{
    diagnostics, extract_smile, fit_dejd, fit_gbm, FitConfig, FitResult, ObservedUtilities, SmileConfig, SmileTarget,
};
use lobsmile::gbm::{bm_hitting_laplace, gbm_utility, GbmParams, HittingSpec};
use lobsmile::ingest::{
    format_timestamp, parse_raw, reconstruct, FeedConfig, GridAnchor, ResampleConfig, ResampledSeries, StartPrice,
};
use lobsmile::report::{cmd_fit, cmd_simulate, load_series, FitRun, ModelChoice, SimFormat, SimulateRun};
use lobsmile::simulator::{
    default_t_max, mc_first_passage, sample_jump, sample_log_increment, simulate_path, BookSpec, Model, Monitoring,
    PassageSpec, PathSpec,
};
use lobsmile::stats::{ols, spearman};
use lobsmile::Side;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "snapshot reconstruction fixture", snapshot_fixture),
    (2, "GBM first-passage transform vs Monte Carlo", gbm_passage_oracle),
    (3, "DEJD first-passage transform vs Monte Carlo", dejd_passage_oracle),
    (4, "G-function root structure", root_structure),
    (5, "DEJD moment formulas vs Monte Carlo", moment_formulas),
    (6, "bipower calibration", bipower_calibration),
    (7, "rate recovery from equilibrium utilities", rate_recovery),
    (8, "LOB-implied smile emergence", smile_emergence),
    (9, "power-law diagnostic", power_law_diagnostic),
    (10, "determinism and no-lookahead", determinism),
];

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {name} ({secs:.1}s): {}", out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

// ---------------------------------------------------------------------------

fn snapshot_fixture() -> Outcome {
    let start = Instant::now();
    let cfg = FeedConfig::default();
    let feed = parse_raw(&fixture("fdax_excerpt.txt"), &cfg).expect("fixture parses");
    let rec = reconstruct(&feed.updates, cfg.depth);
    let got: Vec<String> = rec
        .snapshots
        .iter()
        .map(|s| {
            let mut cells = vec![format_timestamp(s.timestamp_ms)];
            for l in &s.levels {
                cells.push(lobsmile::ingest::fmt_price(cfg.to_price(l.bid), cfg.tick));
                cells.push(lobsmile::ingest::fmt_price(cfg.to_price(l.ask), cfg.tick));
                cells.push(l.bid_size.to_string());
                cells.push(l.ask_size.to_string());
            }
            cells.join(" ")
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let expected: Vec<String> = fixture("fdax_snapshots.txt").lines().map(str::to_string).collect();
    let mismatches: Vec<usize> =
        (0..expected.len().max(got.len())).filter(|&i| expected.get(i) != got.get(i)).collect();
    Outcome::new(
        mismatches.is_empty() && elapsed < 1.0,
        format!(
            "{}/{} rows identical, mismatched rows {:?}, {:.2} ms",
            expected.len() - mismatches.len().min(expected.len()),
            expected.len(),
            mismatches,
            elapsed * 1e3
        ),
    )
}

// ---------------------------------------------------------------------------

const MC_PATHS: usize = 1_000_000;

fn gbm_passage_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for k in 0..20 {
        let mu_hat = rng.random_range(-1.0..1.0);
        let mut z = 0.0;
        while z == 0.0 {
            z = rng.random_range(-2.0..2.0);
        }
        let r = rng.random_range(0.05..2.0);
        let exact = bm_hitting_laplace(mu_hat, z, r);
        let est = mc_first_passage(&PassageSpec {
            process: ParamsHat::diffusion(mu_hat, 1.0),
            barrier: z,
            r,
            n_paths: MC_PATHS,
            t_max: default_t_max(r),
            seed: 1000 + k,
            monitoring: Monitoring::BrownianBridge,
        })
        .expect("valid spec");
        let gap = (exact - est.mean_discount).abs();
        let allowed = 3.0 * est.std_error + 1e-2;
        worst = worst.max(gap / allowed);
        if gap > allowed {
            failures += 1;
        }
    }
    Outcome::new(failures == 0, format!("20 configs, {failures} outside 3 SE + 1e-2, worst gap/allowed {worst:.3}"))
}

fn dejd_passage_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut max_zero_err: f64 = 0.0;
    for k in 0..10 {
        let ph = ParamsHat {
            mu_hat: rng.random_range(-0.2..0.2),
            sigma: rng.random_range(0.1..0.5),
            lambda: rng.random_range(0.5..3.0),
            p: rng.random_range(0.2..0.8),
            eta1: rng.random_range(3.0..20.0),
            eta2: rng.random_range(3.0..20.0),
        };
        let alpha = rng.random_range(0.5..2.0);
        let b = rng.random_range(0.05..1.0);
        let exact = dejd_hitting_laplace(&ph, b, alpha).expect("valid config");
        max_zero_err = max_zero_err.max((dejd_hitting_laplace(&ph, 0.0, alpha).expect("valid") - 1.0).abs());
        let est = mc_first_passage(&PassageSpec {
            process: ph,
            barrier: b,
            r: alpha,
            n_paths: MC_PATHS,
            t_max: default_t_max(alpha),
            seed: 2000 + k,
            monitoring: Monitoring::BrownianBridge,
        })
        .expect("valid spec");
        let gap = (exact - est.mean_discount).abs();
        let allowed = 3.0 * est.std_error + 1e-2;
        worst = worst.max(gap / allowed);
        if gap > allowed {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0 && max_zero_err <= 1e-12,
        format!(
            "10 configs, {failures} outside 3 SE + 1e-2, worst gap/allowed {worst:.3}; |value(b=0) - 1| <= {max_zero_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------

fn root_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut order_violations = 0;
    let mut worst_resid: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..1000 {
        let params = DejdParams::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(0.05..1.0),
            rng.random_range(0.1..10.0),
            rng.random_range(0.05..0.95),
            rng.random_range(2.5..50.0),
            rng.random_range(2.5..50.0),
        )
        .expect("valid draw");
        let ph = ParamsHat::from_params(&params);
        let alpha = rng.random_range(0.01..5.0);
        let Ok(roots) = find_beta_roots(&ph, alpha) else {
            errors += 1;
            continue;
        };
        // β₂ is checked through its gap to η₁, which resolves it below one ulp of η₁.
        let ordered = 0.0 < roots.beta1 && roots.beta1 < ph.eta1 && roots.beta2_gap > 0.0 && ph.eta1 < roots.beta2;
        if !ordered {
            order_violations += 1;
        }
        let g1 = g_function(roots.beta1, &ph).expect("off the pole");
        let g2 = g_above_pole(roots.beta2_gap, &ph);
        for g in [g1, g2] {
            worst_resid = worst_resid.max((g - alpha).abs() / alpha.max(1.0));
        }
    }
    let mut worst_degen: f64 = 0.0;
    for (mu_hat, sigma, alpha, eta1) in [(0.1, 0.5, 0.5, 20.0), (-0.3, 0.5, 1.0, 10.0), (0.0, 0.8, 0.2, 5.0)] {
        let ph = ParamsHat { mu_hat, sigma, lambda: 1e-6, p: 0.5, eta1, eta2: 8.0 };
        let b1 = find_beta_roots(&ph, alpha).expect("valid").beta1;
        let quad = (-mu_hat + (mu_hat * mu_hat + 2.0 * alpha * sigma * sigma).sqrt()) / (sigma * sigma);
        worst_degen = worst_degen.max((b1 - quad).abs() / quad);
        debug_assert!((diffusive_root(mu_hat, sigma, alpha) - quad).abs() < 1e-12 * quad);
    }
    Outcome::new(
        errors == 0 && order_violations == 0 && worst_resid <= 1e-12 && worst_degen <= 1e-3,
        format!(
            "1000 draws: {errors} solver errors, {order_violations} ordering violations, max scaled residual {worst_resid:.2e}; \
             lambda=1e-6 vs quadratic root rel. diff {worst_degen:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------

/// Sample mean and variance with their standard errors.
struct Sample {
    mean: f64,
    mean_se: f64,
    var: f64,
    var_se: f64,
}

fn summarize(xs: &[f64]) -> Sample {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let (m2, m4) = (m2 / n, m4 / n);
    let var = m2 * n / (n - 1.0);
    Sample { mean, mean_se: (var / n).sqrt(), var, var_se: ((m4 - m2 * m2) / n).sqrt() }
}

fn moment_formulas() -> Outcome {
    const N: usize = 2_000_000;
    let params = DejdParams::new(0.05, 0.25, 2.0, 0.4, 10.0, 8.0).expect("valid");
    let ph = ParamsHat::from_params(&params);
    let (t, s0, dt) = (0.75, 100.0, 0.1);
    let jm = jump_moments(&params);
    let pp = poisson_product_moments(&params, t);
    let pm = process_moments(&params, s0, t);
    let lm = logret_moments(&params, dt);

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let y: Vec<f64> = (0..N).map(|_| sample_jump(&mut rng, params.p, params.eta1, params.eta2)).collect();
    let v: Vec<f64> = y.iter().map(|y| y.exp()).collect();
    let v2: Vec<f64> = v.iter().map(|v| v * v).collect();
    let poisson = Poisson::new(params.lambda * t).expect("positive rate");
    let prod: Vec<f64> = (0..N)
        .map(|_| {
            let n = poisson.sample(&mut rng) as u64;
            (0..n).map(|_| sample_jump(&mut rng, params.p, params.eta1, params.eta2)).sum::<f64>().exp()
        })
        .collect();
    let prod2: Vec<f64> = prod.iter().map(|p| p * p).collect();
    let s_t: Vec<f64> = (0..N).map(|_| s0 * sample_log_increment(&mut rng, &ph, t).exp()).collect();
    let l: Vec<f64> = (0..N).map(|_| sample_log_increment(&mut rng, &ph, dt)).collect();

    let (sy, sv, sv2, sp, sp2, ss, sl) = (
        summarize(&y),
        summarize(&v),
        summarize(&v2),
        summarize(&prod),
        summarize(&prod2),
        summarize(&s_t),
        summarize(&l),
    );
    let checks = [
        ("EY", jm.ey, sy.mean, sy.mean_se),
        ("VY", jm.vy, sy.var, sy.var_se),
        ("EV", jm.ev, sv.mean, sv.mean_se),
        ("EV2", jm.ev2, sv2.mean, sv2.mean_se),
        ("VV", jm.vv, sv.var, sv.var_se),
        ("EP", pp.ep, sp.mean, sp.mean_se),
        ("EP2", pp.ep2, sp2.mean, sp2.mean_se),
        ("ES", pm.es, ss.mean, ss.mean_se),
        ("VS", pm.vs, ss.var, ss.var_se),
        ("El", lm.mean, sl.mean, sl.mean_se),
        ("Vl", lm.var, sl.var, sl.var_se),
    ];
    let mut worst = ("", 0.0f64);
    let mut bad = Vec::new();
    for (name, formula, sample, se) in checks {
        let z = (formula - sample).abs() / se;
        if z > worst.1 {
            worst = (name, z);
        }
        if z > 3.0 {
            bad.push(name);
        }
    }
    let sym = DejdParams::new(0.0, 0.2, 1.0, 0.5, 7.3, 7.3).expect("valid");
    let sym_ey = jump_moments(&sym).ey;
    Outcome::new(
        bad.is_empty() && sym_ey == 0.0,
        format!(
            "{} moments at {N} draws, outside 3 SE: {bad:?}, worst {} at {:.2} SE; symmetric EY = {sym_ey}",
            checks.len(),
            worst.0,
            worst.1
        ),
    )
}

// ---------------------------------------------------------------------------

/// Trading seconds in a year of 252 sessions of 8.5 hours.
const YEAR_S: f64 = 252.0 * 8.5 * 3600.0;

fn bipower_calibration() -> Outcome {
    const WINDOW: usize = 30;
    const PATHS: u64 = 300;
    const STEPS: f64 = 1.2e6;
    let params = DejdParams::new(0.0, 0.2, 3.0, 0.4, 4.0, 6.0).expect("valid");
    let dt = 30.0 / YEAR_S;
    let (mut bv_sum, mut jump_sum, mut windows) = (0.0, 0.0, 0usize);
    for seed in 0..PATHS {
        let path = simulate_path(&PathSpec { model: Model::Dejd(params), s0: 6000.0, horizon: STEPS * dt, dt, seed })
            .expect("valid path");
        let (_, prices) = path.grid();
        let rets: Vec<f64> = log_returns(&prices, &[]).into_iter().flatten().collect();
        for w in rets.chunks_exact(WINDOW) {
            let (rv, bv) = (realized_variance(w), bipower_variation(w));
            bv_sum += bv / WINDOW as f64;
            jump_sum += (rv - bv) / WINDOW as f64;
            windows += 1;
        }
    }
    let bv_hat = bv_sum / windows as f64;
    let jump_hat = jump_sum / windows as f64;
    let diffusive = params.sigma * params.sigma * dt;
    let q = params.q();
    let jump = params.lambda * dt * (2.0 * params.p / params.eta1.powi(2) + 2.0 * q / params.eta2.powi(2));
    let e_bv = (bv_hat - diffusive).abs() / diffusive;
    let e_jump = (jump_hat - jump).abs() / jump;
    Outcome::new(
        e_bv <= 0.10 && e_jump <= 0.15,
        format!(
            "{windows} windows: BV/N rel. error {:.2}% (limit 10%), (RV-BV)/N rel. error {:.2}% (limit 15%)",
            100.0 * e_bv,
            100.0 * e_jump
        ),
    )
}

// ---------------------------------------------------------------------------

/// Distance `d > 0` on the increasing branch of `d ↦ U_d(r)` with
/// `U_d(r) = target`.
fn distance_for_utility(side: Side, params: &DejdParams, s0: f64, r: f64, target: f64) -> f64 {
    let u = |d: f64| dejd_utility(side, params, s0, d, r).expect("valid inputs");
    let (mut lo, mut hi) = (1e-9, target);
    while u(hi) < target {
        hi *= 1.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rate_recovery() -> Outcome {
    const N_PTS: usize = 400;
    const WINDOW: usize = 30;
    let (r_star, u_star) = (0.05, 1.5);
    // One stationary regime: σ, λ and p fluctuate around fixed levels, the
    // jump rates and the price wander in small steps.
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let normal = rand_distr::StandardNormal;
    let (mut eta1, mut eta2, mut ask0) = (1500.0, 1400.0, 6000.0);
    let mut truth = Vec::with_capacity(N_PTS);
    let mut starts = Vec::with_capacity(N_PTS);
    for _ in 0..N_PTS {
        let (z1, z2): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
        truth.push(DejdParams {
            mu: 0.0,
            sigma: 4e-4 * (0.2 * z1).exp(),
            lambda: 0.05 * (0.3 * z2).exp(),
            p: rng.random_range(0.4..0.6),
            eta1,
            eta2,
        });
        starts.push(ask0);
        eta1 += rng.random_range(-0.3..0.3);
        eta2 += rng.random_range(-0.3..0.3);
        ask0 += 0.5 * rng.random_range(-2i32..=2) as f64;
    }

    let mut bid_px = Vec::new();
    let mut ask_px = Vec::new();
    let (mut mean, mut std, mut rv, mut bv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut d_ask = Vec::new();
    let mut d_bid = Vec::new();
    for (p, &ask0) in truth.iter().zip(&starts) {
        let bid0 = ask0 - 0.5;
        let da = distance_for_utility(Side::Ask, p, ask0, r_star, u_star);
        let db = distance_for_utility(Side::Bid, p, bid0, r_star, u_star);
        d_ask.push(da);
        d_bid.push(-db);
        ask_px.push(vec![ask0, ask0 + da]);
        bid_px.push(vec![bid0, bid0 - db]);
        let q = p.q();
        let s2 = p.sigma * p.sigma;
        let jv = p.lambda * (2.0 * p.p / (p.eta1 * p.eta1) + 2.0 * q / (p.eta2 * p.eta2));
        let jm = p.lambda * (p.p / p.eta1 - q / p.eta2);
        mean.push(jm - 0.5 * s2);
        std.push((s2 + jv).sqrt());
        bv.push(s2 * WINDOW as f64);
        rv.push((s2 + jv) * WINDOW as f64);
    }
    let ts: Vec<i64> = (0..N_PTS as i64).map(|i| 9 * 3_600_000 + 30_000 * i).collect();
    let series = ResampledSeries::from_levels(30.0, 0.5, StartPrice::BestOffer, ts, bid_px, ask_px);
    let stats = RollingStats::from_parts(WINDOW, mean, std, rv, bv);
    let config =
        FitConfig { r0: r_star, u0: Some(u_star), eta0: Some((truth[0].eta1, truth[0].eta2)), ..FitConfig::default() };
    let fit = fit_dejd(&series, &stats, &config).expect("fit runs");

    let mut n_valid = 0;
    let mut n_close = 0;
    let mut t_stats = Vec::new();
    for (side, d) in [(Side::Ask, &d_ask), (Side::Bid, &d_bid)] {
        let s = fit.side(side);
        let idx: Vec<usize> = (0..N_PTS).filter(|&i| s.valid[i]).collect();
        n_valid += idx.len();
        n_close += idx.iter().filter(|&&i| (s.r[i] - r_star).abs() <= 0.05 * r_star).count();
        let x: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| s.r[i]).collect();
        t_stats.push(ols(&x, &y).map_or(f64::NAN, |reg| reg.t_stat));
        if std::env::var("ACCEPTANCE_DEBUG").is_ok() {
            let dev = y.iter().map(|r| (r / r_star - 1.0).abs()).fold(0.0, f64::max);
            eprintln!("{side}: max rel dev {dev:.3e}, reg {:?}", ols(&x, &y));
            for &i in idx.iter().step_by(40) {
                eprintln!("  {i} d {:.4} r {:.12} u {:.10}", d[i], s.r[i], s.u[i]);
            }
        }
    }
    let frac = n_close as f64 / n_valid.max(1) as f64;
    Outcome::new(
        n_valid > 0 && frac >= 0.9 && t_stats.iter().all(|t| t.abs() < 2.0),
        format!(
            "{n_valid}/{} side-points valid, {:.1}% within 5% of r*, slope t-stats ask {:.2} bid {:.2}",
            2 * N_PTS,
            100.0 * frac,
            t_stats[0],
            t_stats[1]
        ),
    )
}

// ---------------------------------------------------------------------------

/// One synthetic trading day: 30 s grid, 8.5 hours, events every second,
/// parameters per grid step.
fn synthetic_day(dir: &Path, params: DejdParams, seed: u64, horizon_s: f64) -> ResampledSeries {
    let run = SimulateRun {
        out_dir: dir.to_path_buf(),
        params,
        time_unit_s: 30.0,
        s0: 6000.0,
        start_ms: 9 * 3_600_000,
        horizon_s,
        event_ms: 1000,
        book: BookSpec { seed, ..BookSpec::default() },
        seed,
        format: SimFormat::Raw,
    };
    let path = cmd_simulate(&run).expect("simulation runs");
    load_series(&path, &FeedConfig::default(), &grid()).expect("feed loads")
}

fn grid() -> ResampleConfig {
    ResampleConfig { dt_s: 30.0, anchor: GridAnchor::FirstSnapshot, start_price: StartPrice::BestOffer }
}

const DAY_S: f64 = 8.5 * 3600.0;

fn jump_day() -> DejdParams {
    DejdParams::new(0.0, 4e-4, 0.05, 0.5, 1500.0, 1500.0).expect("valid")
}

fn smile_emergence() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let series = synthetic_day(dir.path(), jump_day(), 8, DAY_S);
    let stats = rolling_stats(&series.mid, &series.valid, 30).expect("stats");
    let smile = extract_smile(&series, &stats, &SmileConfig::default()).expect("smile");
    let mut rhos = Vec::new();
    for side in Side::BOTH {
        let pts: Vec<_> = smile.points.iter().filter(|p| p.side == side).collect();
        let x: Vec<f64> = pts.iter().map(|p| (p.moneyness - 1.0).abs()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.sigma).collect();
        rhos.push((pts.len(), spearman(&x, &y)));
    }

    // Control: utilities generated by the diffusion itself.
    let sigma = 4e-4;
    let gbm_series = synthetic_day(dir.path(), DejdParams { lambda: 0.0, ..jump_day() }, 9, DAY_S);
    let gbm_stats = rolling_stats(&gbm_series.mid, &gbm_series.valid, 30).expect("stats");
    let r = 0.5;
    let model = GbmParams::new(0.0, sigma).expect("valid");
    let mut obs = ObservedUtilities::default();
    for i in 0..gbm_series.len() {
        for side in Side::BOTH {
            let row: Vec<f64> = (0..gbm_series.depth())
                .map(|k| match (gbm_series.start(side, i), gbm_series.distance(side, i, k)) {
                    (Some(s0), Some(d)) if d != 0.0 => {
                        gbm_utility(&model, &HittingSpec::new(s0, d).expect("valid"), r).expect("valid")
                    }
                    _ => f64::NAN,
                })
                .collect();
            match side {
                Side::Bid => obs.bid.push(row),
                Side::Ask => obs.ask.push(row),
            }
        }
    }
    let control = extract_smile(
        &gbm_series,
        &gbm_stats,
        &SmileConfig { target: SmileTarget::Observed(obs), ..SmileConfig::default() },
    )
    .expect("control smile");
    let flat = control.points.iter().map(|p| (p.sigma - sigma).abs() / sigma).fold(0.0, f64::max);
    Outcome::new(
        rhos.iter().all(|&(n, rho)| n > 0 && rho > 0.9) && !control.points.is_empty() && flat <= 1e-6,
        format!(
            "Spearman bid {:.3} ({} pts), ask {:.3} ({} pts); control max rel. deviation {flat:.1e} over {} pts",
            rhos[0].1,
            rhos[0].0,
            rhos[1].1,
            rhos[1].0,
            control.points.len()
        ),
    )
}

// ---------------------------------------------------------------------------

fn pooled(fit: &FitResult) -> (f64, f64, usize) {
    let d = diagnostics(fit, 0.05);
    d.pooled.map_or((f64::NAN, f64::NAN, 0), |r| (r.slope, r.t_stat, r.n))
}

fn power_law_diagnostic() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let series = synthetic_day(dir.path(), jump_day(), 8, DAY_S);
    let config = FitConfig::default();
    let stats = rolling_stats(&series.mid, &series.valid, config.window_n).expect("stats");
    let gbm = fit_gbm(&series, &stats, &config).expect("gbm fit");
    let dejd = fit_dejd(&series, &stats, &config).expect("dejd fit");
    let (gs, gt, gn) = pooled(&gbm);
    let (ds, dt, dn) = pooled(&dejd);
    let gbm_ok = gs < 0.0 && gt < -2.0;
    let dejd_ok = !(ds < 0.0 && dt < -2.0);
    Outcome::new(
        gbm_ok && dejd_ok,
        format!("GBM slope {gs:.3} (t {gt:.2}, n {gn}); DEJD slope {ds:.3} (t {dt:.2}, n {dn})"),
    )
}

// ---------------------------------------------------------------------------

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "txt") && !p.ends_with("manifest.txt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("readable")))
        .collect();
    out.sort();
    out
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().expect("temp dir");
    let horizon = 200.0 * 30.0;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = root.path().join(name);
        synthetic_day(&dir, jump_day(), 11, horizon);
        let fit = FitRun {
            input: dir.join("simulated_feed.txt"),
            out_dir: dir.clone(),
            feed: FeedConfig::default(),
            resample: grid(),
            fit: FitConfig::default(),
            model: ModelChoice::Both,
            date: Some("day".into()),
            invalid_budget: 1.0,
            segment_jump: 0.05,
        };
        cmd_fit(&fit).expect("fit runs");
        runs.push(csv_files(&dir));
    }
    let identical = runs[0] == runs[1] && runs[0].len() >= 5;

    let series = load_series(&root.path().join("a/simulated_feed.txt"), &FeedConfig::default(), &grid()).expect("load");
    let config = FitConfig::default();
    let full_stats = rolling_stats(&series.mid, &series.valid, config.window_n).expect("stats");
    let full =
        [fit_gbm(&series, &full_stats, &config).expect("fit"), fit_dejd(&series, &full_stats, &config).expect("fit")];
    let mut leaks = 0;
    let cuts = [60, 120, 170];
    for &cut in &cuts {
        let part = series.truncated(cut);
        let stats = rolling_stats(&part.mid, &part.valid, config.window_n).expect("stats");
        for (k, a) in full_stats.mean.iter().take(cut).enumerate() {
            if a.to_bits() != stats.mean[k].to_bits() || full_stats.rv[k].to_bits() != stats.rv[k].to_bits() {
                leaks += 1;
            }
        }
        let truncated = [fit_gbm(&part, &stats, &config).expect("fit"), fit_dejd(&part, &stats, &config).expect("fit")];
        let keep = cut - config.steps;
        for (f, t) in full.iter().zip(&truncated) {
            for side in Side::BOTH {
                let (fs, ts) = (f.side(side), t.side(side));
                if !same_bits(&fs.r[..keep], &ts.r[..keep])
                    || !same_bits(&fs.u[..keep], &ts.u[..keep])
                    || fs.valid[..keep] != ts.valid[..keep]
                {
                    leaks += 1;
                }
            }
        }
    }
    Outcome::new(
        identical && leaks == 0,
        format!(
            "{} output files byte-identical across runs: {identical}; truncation at {cuts:?}: {leaks} prefixes changed",
            runs[0].len()
        ),
    )
}
