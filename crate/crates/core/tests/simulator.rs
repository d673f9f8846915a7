use lobsmile::dejd::{dejd_hitting_laplace, DejdParams, ParamsHat};
use lobsmile::gbm::{bm_hitting_laplace, GbmParams};
use lobsmile::ingest::{parse_raw, reconstruct, resample, FeedConfig, ResampleConfig};
use lobsmile::simulator::{
    mc_first_passage, sample_jump, simulate_path, stream_rng, synth_lob_day, BookSpec, Model, Monitoring, PassageSpec,
    PathSpec,
};

fn jumpy() -> DejdParams {
    DejdParams::new(0.02, 0.3, 4.0, 0.4, 12.0, 9.0).unwrap()
}

#[test]
fn paths_are_reproducible() {
    let spec = PathSpec { model: Model::Dejd(jumpy()), s0: 100.0, horizon: 5.0, dt: 0.01, seed: 11 };
    let a = simulate_path(&spec).unwrap();
    let b = simulate_path(&spec).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&PathSpec { seed: 12, ..spec }).unwrap();
    assert_ne!(a.prices, c.prices);
    let (grid_t, _) = a.grid();
    assert_eq!(grid_t.len(), 501);
    assert!(a.is_jump.iter().any(|&j| j));
    assert!(a.times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn path_log_returns_match_model_moments() {
    let g = GbmParams::new(0.1, 0.2).unwrap();
    let dt = 0.01;
    let path = simulate_path(&PathSpec { model: Model::Gbm(g), s0: 1.0, horizon: 2000.0, dt, seed: 3 }).unwrap();
    let r: Vec<f64> = path.prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = r.len() as f64;
    let m = r.iter().sum::<f64>() / n;
    let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let (em, ev) = ((0.1 - 0.02) * dt, 0.04 * dt);
    assert!((m - em).abs() < 4.0 * (ev / n).sqrt(), "mean {m} vs {em}");
    assert!((v - ev).abs() < 4.0 * ev * (2.0 / n).sqrt(), "variance {v} vs {ev}");
}

#[test]
fn jump_sizes_have_the_right_mean() {
    let mut rng = stream_rng(5, 0);
    let n = 400_000;
    let (p, e1, e2) = (0.3, 8.0, 5.0);
    let ys: Vec<f64> = (0..n).map(|_| sample_jump(&mut rng, p, e1, e2)).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let up = ys.iter().filter(|&&y| y > 0.0).count() as f64 / n as f64;
    let expected = p / e1 - (1.0 - p) / e2;
    assert!((mean - expected).abs() < 0.002, "{mean} vs {expected}");
    assert!((up - p).abs() < 0.005);
}

#[test]
fn synthetic_feed_tracks_the_path() {
    let times: Vec<i64> = (0..200).map(|k| 36_000_000 + 1000 * k).collect();
    let prices: Vec<f64> = (0..200).map(|k| 6000.0 + 3.0 * (k as f64 / 15.0).sin()).collect();
    let book = BookSpec::default();
    let text = synth_lob_day(&times, &prices, &book).unwrap();
    assert_eq!(text, synth_lob_day(&times, &prices, &book).unwrap());
    let feed = FeedConfig::default();
    let rec = reconstruct(&parse_raw(&text, &feed).unwrap().updates, feed.depth);
    let series =
        resample(&rec.snapshots, feed.tick, &ResampleConfig { dt_s: 1.0, ..ResampleConfig::default() }).unwrap();
    // unchanged levels are not rewritten, so the feed may end early
    assert!(series.len() > 190 && series.len() <= 200);
    for (i, &p) in prices.iter().enumerate().take(series.len()) {
        assert!(series.valid[i]);
        assert!((series.mid[i] - p).abs() <= 0.5 * feed.tick + 1e-9, "point {i}");
        assert_eq!(series.deepest_level(lobsmile::Side::Ask, i), Some(4));
    }
    assert!(synth_lob_day(&times[..3], &prices[..2], &book).is_err());
}

#[test]
fn bridge_monitoring_matches_diffusion_transform() {
    let (mu_hat, sigma, b, r) = (0.05, 0.4, 0.3, 0.8);
    let spec = PassageSpec {
        process: ParamsHat::diffusion(mu_hat, sigma),
        barrier: b,
        r,
        n_paths: 100_000,
        t_max: 25.0,
        seed: 9,
        monitoring: Monitoring::BrownianBridge,
    };
    let est = mc_first_passage(&spec).unwrap();
    let exact = bm_hitting_laplace(mu_hat / sigma, b / sigma, r);
    assert!((est.mean_discount - exact).abs() < 4.0 * est.std_error + 1e-4, "{} vs {exact}", est.mean_discount);
    let coarse = mc_first_passage(&PassageSpec { monitoring: Monitoring::Discrete { step: 0.05 }, ..spec }).unwrap();
    assert!(coarse.mean_discount < est.mean_discount);
}

#[test]
fn jump_passage_matches_closed_form() {
    let ph = ParamsHat::from_params(&jumpy());
    let spec = PassageSpec {
        process: ph,
        barrier: 0.2,
        r: 1.0,
        n_paths: 100_000,
        t_max: 20.0,
        seed: 4,
        monitoring: Monitoring::BrownianBridge,
    };
    let est = mc_first_passage(&spec).unwrap();
    let exact = dejd_hitting_laplace(&ph, 0.2, 1.0).unwrap();
    assert!((est.mean_discount - exact).abs() < 4.0 * est.std_error + 1e-4, "{} vs {exact}", est.mean_discount);
    assert_eq!(mc_first_passage(&spec).unwrap().mean_discount.to_bits(), est.mean_discount.to_bits());
}

#[test]
fn passage_rejects_bad_requests() {
    let spec = PassageSpec {
        process: ParamsHat::diffusion(0.0, 0.2),
        barrier: 0.1,
        r: 0.0,
        n_paths: 10,
        t_max: 10.0,
        seed: 0,
        monitoring: Monitoring::BrownianBridge,
    };
    assert!(mc_first_passage(&spec).is_err());
    assert!(mc_first_passage(&PassageSpec { r: 1.0, n_paths: 0, ..spec }).is_err());
}
