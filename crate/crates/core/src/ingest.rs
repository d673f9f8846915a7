//! Raw level-update feed parsing, book reconstruction and resampling.
//!
//! The feed carries one line per changed level:
//!
//! ```text
//! 13:59:32:367; 3; 6022; 6025.5; 25; 32
//! ```
//!
//! i.e. `time; level; bid; ask; bid size; ask size`. A price of zero means the
//! level holds no quote. Prices are kept as integer tick counts so that the
//! rebuilt snapshots compare exactly.

use std::io::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::Side;

/// Number of milliseconds in a day; timestamps never cross midnight.
pub const MS_PER_DAY: i64 = 24 * 3600 * 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedConfig {
    /// Number of book levels per side (levels `0..depth`).
    pub depth: usize,
    /// Minimal price increment in quote units.
    pub tick: f64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        Self { depth: 5, tick: 0.5 }
    }
}

impl FeedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("book depth must be at least 1".into()));
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(Error::Config(format!("tick size must be positive, got {}", self.tick)));
        }
        Ok(())
    }

    pub fn to_ticks(&self, price: f64) -> Option<i64> {
        let ticks = (price / self.tick).round();
        let back = ticks * self.tick;
        if (back - price).abs() <= 1e-9 * price.abs().max(1.0) {
            Some(ticks as i64)
        } else {
            None
        }
    }

    pub fn to_price(&self, ticks: i64) -> f64 {
        ticks as f64 * self.tick
    }
}

/// One line of the raw feed. Prices are in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LobUpdate {
    pub timestamp_ms: i64,
    pub level: usize,
    pub bid: i64,
    pub ask: i64,
    pub bid_size: u64,
    pub ask_size: u64,
}

impl LobUpdate {
    pub fn bid_price(&self, tick: f64) -> f64 {
        self.bid as f64 * tick
    }

    pub fn ask_price(&self, tick: f64) -> f64 {
        self.ask as f64 * tick
    }
}

/// Quotes at a single book level, prices in ticks. All-zero means empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Level {
    pub bid: i64,
    pub ask: i64,
    pub bid_size: u64,
    pub ask_size: u64,
}

impl Level {
    pub const EMPTY: Level = Level { bid: 0, ask: 0, bid_size: 0, ask_size: 0 };

    fn is_match(&self) -> bool {
        self.bid != 0 && self.bid == self.ask
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LobSnapshot {
    pub timestamp_ms: i64,
    pub levels: Vec<Level>,
}

impl LobSnapshot {
    pub fn best_bid(&self) -> Option<i64> {
        self.levels.first().map(|l| l.bid).filter(|&p| p != 0)
    }

    pub fn best_ask(&self) -> Option<i64> {
        self.levels.first().map(|l| l.ask).filter(|&p| p != 0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedFeed {
    pub updates: Vec<LobUpdate>,
    /// Lines whose timestamp precedes the line before them.
    pub non_monotone: usize,
}

/// Parses `HH:MM:SS:mmm` into milliseconds since midnight.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let mut parts = s.trim().split(':');
    let h: i64 = parts.next()?.trim().parse().ok()?;
    let m: i64 = parts.next()?.trim().parse().ok()?;
    let sec: i64 = parts.next()?.trim().parse().ok()?;
    let ms: i64 = parts.next()?.trim().parse().ok()?;
    if parts.next().is_some() || !(0..24).contains(&h) || !(0..60).contains(&m) {
        return None;
    }
    if !(0..60).contains(&sec) || !(0..1000).contains(&ms) {
        return None;
    }
    Some(((h * 60 + m) * 60 + sec) * 1000 + ms)
}

pub fn format_timestamp(ms: i64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, milli) = (rem / 1000, rem % 1000);
    format!("{h:02}:{m:02}:{s:02}:{milli:03}")
}

/// Parses the raw feed. Blank lines are ignored; line numbers in errors are
/// 1-based.
pub fn parse_raw(text: &str, config: &FeedConfig) -> Result<ParsedFeed> {
    config.validate()?;
    let mut feed = ParsedFeed::default();
    let mut last_ts = i64::MIN;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let update = parse_line(raw, config).map_err(|message| Error::Parse { line: line_no, message })?;
        if update.timestamp_ms < last_ts {
            feed.non_monotone += 1;
            warn!("line {line_no}: timestamp goes backwards");
        }
        last_ts = update.timestamp_ms;
        feed.updates.push(update);
    }
    Ok(feed)
}

fn parse_line(raw: &str, config: &FeedConfig) -> std::result::Result<LobUpdate, String> {
    let mut fields: Vec<&str> = raw.split(';').map(str::trim).collect();
    // tolerate a trailing separator
    if fields.len() == 7 && fields[6].is_empty() {
        fields.pop();
    }
    if fields.len() != 6 {
        return Err(format!("expected 6 `;`-separated fields, found {}", fields.len()));
    }
    let timestamp_ms = parse_timestamp(fields[0]).ok_or_else(|| format!("bad timestamp `{}`", fields[0]))?;
    let level: usize = fields[1].parse().map_err(|_| format!("bad level `{}`", fields[1]))?;
    let price = |s: &str| -> std::result::Result<i64, String> {
        let v: f64 = s.parse().map_err(|_| format!("bad price `{s}`"))?;
        if !v.is_finite() || v < 0.0 {
            return Err(format!("price must be non-negative, got `{s}`"));
        }
        config.to_ticks(v).ok_or_else(|| format!("price {s} is not a multiple of tick {}", config.tick))
    };
    let size = |s: &str| -> std::result::Result<u64, String> { s.parse().map_err(|_| format!("bad size `{s}`")) };
    Ok(LobUpdate {
        timestamp_ms,
        level,
        bid: price(fields[2])?,
        ask: price(fields[3])?,
        bid_size: size(fields[4])?,
        ask_size: size(fields[5])?,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub snapshots: Vec<LobSnapshot>,
    /// Updates dropped because their level was outside the book depth.
    pub skipped: usize,
}

/// Rebuilds one full book snapshot per distinct timestamp.
///
/// The book starts blank. Updates with the same timestamp are applied in feed
/// order, later ones overwriting earlier ones. Levels not mentioned carry over
/// from the previous snapshot, with one exception: after a snapshot whose
/// level 0 shows a matched price (an execution), the exchange does not quote
/// level 0 until it is updated again, so it starts the next timestamp empty.
pub fn reconstruct(updates: &[LobUpdate], depth: usize) -> Reconstruction {
    let mut out = Reconstruction::default();
    let mut book = vec![Level::EMPTY; depth];
    let mut i = 0;
    while i < updates.len() {
        let ts = updates[i].timestamp_ms;
        if book.first().is_some_and(Level::is_match) {
            book[0] = Level::EMPTY;
        }
        while i < updates.len() && updates[i].timestamp_ms == ts {
            let u = &updates[i];
            if u.level < depth {
                book[u.level] = Level { bid: u.bid, ask: u.ask, bid_size: u.bid_size, ask_size: u.ask_size };
            } else {
                out.skipped += 1;
                warn!("update at {} for level {} beyond depth {depth}", format_timestamp(ts), u.level);
            }
            i += 1;
        }
        out.snapshots.push(LobSnapshot { timestamp_ms: ts, levels: book.clone() });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Execution {
    pub timestamp_ms: i64,
    pub price: f64,
    pub size: u64,
}

/// Emits an execution for every snapshot whose best bid equals its best ask.
pub fn detect_executions(snapshots: &[LobSnapshot], tick: f64) -> Vec<Execution> {
    snapshots
        .iter()
        .filter_map(|s| {
            let l0 = s.levels.first()?;
            l0.is_match().then(|| Execution {
                timestamp_ms: s.timestamp_ms,
                price: l0.bid as f64 * tick,
                size: l0.bid_size.min(l0.ask_size),
            })
        })
        .collect()
}

/// Where the equidistant grid starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridAnchor {
    /// First grid point at the first snapshot's timestamp.
    #[default]
    FirstSnapshot,
    /// First grid point at the given millisecond of the day.
    At(i64),
}

/// Reference price that distances to fill are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartPrice {
    /// Best offer of the side the order rests on.
    #[default]
    BestOffer,
    Mid,
}

impl std::str::FromStr for StartPrice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" | "best-offer" => Ok(StartPrice::BestOffer),
            "mid" => Ok(StartPrice::Mid),
            other => Err(Error::Config(format!("unknown start price `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleConfig {
    pub dt_s: f64,
    pub anchor: GridAnchor,
    pub start_price: StartPrice,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self { dt_s: 30.0, anchor: GridAnchor::FirstSnapshot, start_price: StartPrice::BestOffer }
    }
}

/// Book state sampled on an equidistant time grid.
///
/// Level prices are in quote units with `0.0` meaning "no quote". `valid[i]`
/// is false when either best quote is missing at grid point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSeries {
    pub dt_s: f64,
    pub tick: f64,
    pub start_price: StartPrice,
    pub timestamps_ms: Vec<i64>,
    pub bid_px: Vec<Vec<f64>>,
    pub ask_px: Vec<Vec<f64>>,
    pub bid_sz: Vec<Vec<u64>>,
    pub ask_sz: Vec<Vec<u64>>,
    pub mid: Vec<f64>,
    pub best_bid: Vec<f64>,
    pub best_ask: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ResampledSeries {
    /// Builds a series from per-point level prices; derived quantities are
    /// filled in. Sizes default to zero.
    pub fn from_levels(
        dt_s: f64,
        tick: f64,
        start_price: StartPrice,
        timestamps_ms: Vec<i64>,
        bid_px: Vec<Vec<f64>>,
        ask_px: Vec<Vec<f64>>,
    ) -> Self {
        let zeros: Vec<Vec<u64>> = bid_px.iter().map(|l| vec![0; l.len()]).collect();
        let mut s = ResampledSeries {
            dt_s,
            tick,
            start_price,
            timestamps_ms,
            bid_px,
            ask_px,
            bid_sz: zeros.clone(),
            ask_sz: zeros,
            mid: Vec::new(),
            best_bid: Vec::new(),
            best_ask: Vec::new(),
            valid: Vec::new(),
        };
        s.derive();
        s
    }

    fn derive(&mut self) {
        let n = self.timestamps_ms.len();
        self.best_bid = (0..n).map(|i| self.bid_px[i].first().copied().unwrap_or(0.0)).collect();
        self.best_ask = (0..n).map(|i| self.ask_px[i].first().copied().unwrap_or(0.0)).collect();
        self.valid = (0..n).map(|i| self.best_bid[i] > 0.0 && self.best_ask[i] > 0.0).collect();
        self.mid = (0..n)
            .map(|i| if self.valid[i] { (self.best_bid[i] + self.best_ask[i]) / 2.0 } else { f64::NAN })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.bid_px.first().map_or(0, Vec::len)
    }

    /// Start price S of `side` at grid point `i`. The mid needs both sides;
    /// the best offer only its own.
    pub fn start(&self, side: Side, i: usize) -> Option<f64> {
        let s = match (self.start_price, side) {
            (StartPrice::Mid, _) if self.valid[i] => self.mid[i],
            (StartPrice::Mid, _) => return None,
            (StartPrice::BestOffer, Side::Bid) => self.best_bid[i],
            (StartPrice::BestOffer, Side::Ask) => self.best_ask[i],
        };
        (s > 0.0).then_some(s)
    }

    /// Signed distance to fill `D = level price - S`: positive on the ask
    /// side, negative on the bid side. `None` when the level or the start
    /// price is missing.
    pub fn distance(&self, side: Side, i: usize, level: usize) -> Option<f64> {
        let s = self.start(side, i)?;
        let px = match side {
            Side::Bid => self.bid_px[i][level],
            Side::Ask => self.ask_px[i][level],
        };
        (px > 0.0).then_some(px - s)
    }

    /// Deepest level on `side` that carries a quote at grid point `i`.
    pub fn deepest_level(&self, side: Side, i: usize) -> Option<usize> {
        let px = match side {
            Side::Bid => &self.bid_px[i],
            Side::Ask => &self.ask_px[i],
        };
        px.iter().rposition(|&p| p > 0.0)
    }

    /// Converts back to snapshots, one per grid point.
    pub fn to_snapshots(&self) -> Vec<LobSnapshot> {
        let cfg = FeedConfig { depth: self.depth(), tick: self.tick };
        let tk = |p: f64| cfg.to_ticks(p).unwrap_or_else(|| (p / self.tick).round() as i64);
        (0..self.len())
            .map(|i| LobSnapshot {
                timestamp_ms: self.timestamps_ms[i],
                levels: (0..self.depth())
                    .map(|k| Level {
                        bid: tk(self.bid_px[i][k]),
                        ask: tk(self.ask_px[i][k]),
                        bid_size: self.bid_sz[i][k],
                        ask_size: self.ask_sz[i][k],
                    })
                    .collect(),
            })
            .collect()
    }

    /// Keeps only the first `n` grid points.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        ResampledSeries {
            dt_s: self.dt_s,
            tick: self.tick,
            start_price: self.start_price,
            timestamps_ms: self.timestamps_ms[..n].to_vec(),
            bid_px: self.bid_px[..n].to_vec(),
            ask_px: self.ask_px[..n].to_vec(),
            bid_sz: self.bid_sz[..n].to_vec(),
            ask_sz: self.ask_sz[..n].to_vec(),
            mid: self.mid[..n].to_vec(),
            best_bid: self.best_bid[..n].to_vec(),
            best_ask: self.best_ask[..n].to_vec(),
            valid: self.valid[..n].to_vec(),
        }
    }
}

/// Samples snapshots onto an equidistant grid, carrying the latest snapshot
/// at or before each grid time forward. The grid ends at the last snapshot.
pub fn resample(snapshots: &[LobSnapshot], tick: f64, config: &ResampleConfig) -> Result<ResampledSeries> {
    let dt_ms = (config.dt_s * 1000.0).round() as i64;
    if dt_ms < 1 {
        return Err(Error::Config(format!("grid spacing must be at least 1 ms, got {} s", config.dt_s)));
    }
    let first = snapshots.first().ok_or_else(|| Error::Data("no snapshots to resample".into()))?;
    let last = snapshots.last().map(|s| s.timestamp_ms).unwrap_or(first.timestamp_ms);
    let start = match config.anchor {
        GridAnchor::FirstSnapshot => first.timestamp_ms,
        GridAnchor::At(t) => t,
    };
    if start < first.timestamp_ms {
        return Err(Error::Data(format!("no snapshot at or before the first grid point {}", format_timestamp(start))));
    }
    let depth = first.levels.len();
    let mut series = ResampledSeries::from_levels(config.dt_s, tick, config.start_price, vec![], vec![], vec![]);
    let mut j = 0;
    let mut t = start;
    while t <= last {
        while j + 1 < snapshots.len() && snapshots[j + 1].timestamp_ms <= t {
            j += 1;
        }
        let snap = &snapshots[j];
        let lv = |k: usize| snap.levels.get(k).copied().unwrap_or(Level::EMPTY);
        series.timestamps_ms.push(t);
        series.bid_px.push((0..depth).map(|k| lv(k).bid as f64 * tick).collect());
        series.ask_px.push((0..depth).map(|k| lv(k).ask as f64 * tick).collect());
        series.bid_sz.push((0..depth).map(|k| lv(k).bid_size).collect());
        series.ask_sz.push((0..depth).map(|k| lv(k).ask_size).collect());
        t += dt_ms;
    }
    series.derive();
    Ok(series)
}

/// Formats a price with as many decimals as the tick needs, dropping
/// trailing zeros (`6024`, `6025.5`).
pub fn fmt_price(p: f64, tick: f64) -> String {
    let decimals = (0..=10).find(|&d| {
        let scaled = tick * 10f64.powi(d);
        (scaled - scaled.round()).abs() < 1e-9 * scaled.max(1.0)
    });
    let s = format!("{:.*}", decimals.unwrap_or(10) as usize, p);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn snapshot_header(depth: usize) -> String {
    let mut h = String::from("ts_ms");
    for k in 0..depth {
        h.push_str(&format!(",l{k}_bp,l{k}_ap,l{k}_bs,l{k}_as"));
    }
    h
}

pub fn write_snapshots_csv<W: Write>(mut w: W, snapshots: &[LobSnapshot], config: &FeedConfig) -> Result<()> {
    writeln!(w, "{}", snapshot_header(config.depth))?;
    for s in snapshots {
        write!(w, "{}", s.timestamp_ms)?;
        for l in &s.levels {
            write!(
                w,
                ",{},{},{},{}",
                fmt_price(config.to_price(l.bid), config.tick),
                fmt_price(config.to_price(l.ask), config.tick),
                l.bid_size,
                l.ask_size
            )?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads snapshots written by [`write_snapshots_csv`].
pub fn read_snapshots_csv(text: &str, config: &FeedConfig) -> Result<Vec<LobSnapshot>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols = header.split(',').count();
    if !header.starts_with("ts_ms") || (cols - 1) % 4 != 0 {
        return Err(Error::Parse { line: 1, message: "not a snapshot CSV header".into() });
    }
    let depth = (cols - 1) / 4;
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let err = |m: String| Error::Parse { line: line_no, message: m };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols {
            return Err(err(format!("expected {cols} columns, found {}", f.len())));
        }
        let timestamp_ms: i64 = f[0].parse().map_err(|_| err(format!("bad timestamp `{}`", f[0])))?;
        let px = |s: &str| -> Result<i64> {
            let v: f64 = s.parse().map_err(|_| err(format!("bad price `{s}`")))?;
            config.to_ticks(v).ok_or_else(|| err(format!("price {s} off the tick grid")))
        };
        let sz = |s: &str| -> Result<u64> { s.parse().map_err(|_| err(format!("bad size `{s}`"))) };
        let mut levels = Vec::with_capacity(depth);
        for k in 0..depth {
            let b = 1 + 4 * k;
            levels.push(Level { bid: px(f[b])?, ask: px(f[b + 1])?, bid_size: sz(f[b + 2])?, ask_size: sz(f[b + 3])? });
        }
        out.push(LobSnapshot { timestamp_ms, levels });
    }
    Ok(out)
}

pub fn write_executions_csv<W: Write>(mut w: W, executions: &[Execution], tick: f64) -> Result<()> {
    writeln!(w, "ts_ms,price,size")?;
    for e in executions {
        writeln!(w, "{},{},{}", e.timestamp_ms, fmt_price(e.price, tick), e.size)?;
    }
    Ok(())
}
