use std::fmt::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{fmt_price, format_timestamp, MS_PER_DAY};

use super::rng::stream_rng;

/// Shape of a synthetic book.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookSpec {
    pub depth: usize,
    pub tick: f64,
    /// Order sizes are drawn uniformly from `size_min..=size_max`.
    pub size_min: u64,
    pub size_max: u64,
    pub seed: u64,
}

impl Default for BookSpec {
    fn default() -> Self {
        Self { depth: 5, tick: 0.5, size_min: 1, size_max: 50, seed: 0 }
    }
}

/// Renders a price path as a raw level-update feed.
///
/// At each event the best bid is the path price rounded down to the tick
/// grid and the best ask one tick above, so the rebuilt mid stays within
/// half a tick of the path. Deeper levels sit at consecutive ticks. Only
/// levels whose prices moved are written.
pub fn synth_lob_day(times_ms: &[i64], prices: &[f64], book: &BookSpec) -> Result<String> {
    if times_ms.len() != prices.len() {
        return Err(Error::Data("times and prices differ in length".into()));
    }
    if book.depth == 0 || !(book.tick > 0.0) || book.size_min > book.size_max {
        return Err(Error::Config(format!("bad book spec {book:?}")));
    }
    let mut rng = stream_rng(book.seed, u64::MAX);
    let mut out = String::new();
    let mut last: Vec<Option<(i64, i64)>> = vec![None; book.depth];
    for (&t, &p) in times_ms.iter().zip(prices) {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Data(format!("non-positive price {p} at {t} ms")));
        }
        if !(0..MS_PER_DAY).contains(&t) {
            return Err(Error::Data(format!("event time {t} ms outside the trading day")));
        }
        let best_bid = (p / book.tick).floor() as i64;
        for (k, prev) in last.iter_mut().enumerate() {
            let bid = (best_bid - k as i64).max(0);
            let ask = best_bid + 1 + k as i64;
            if *prev == Some((bid, ask)) {
                continue;
            }
            *prev = Some((bid, ask));
            let bs = if bid > 0 { rng.random_range(book.size_min..=book.size_max) } else { 0 };
            let asz = rng.random_range(book.size_min..=book.size_max);
            writeln!(
                out,
                "{}; {}; {}; {}; {}; {}",
                format_timestamp(t),
                k,
                fmt_price(bid as f64 * book.tick, book.tick),
                fmt_price(ask as f64 * book.tick, book.tick),
                bs,
                asz
            )
            .expect("writing to a String cannot fail");
        }
    }
    Ok(out)
}
