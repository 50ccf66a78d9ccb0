//! Seeded synthetic order flow and daily close series.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`; stock `i` of a market uses stream `i` of the same seed, so
//! a fixture is reproducible from its config alone.
//!
//! The flow generator keeps its own copy of the book so it can place orders
//! relative to the current quotes:
//!
//! * Passive limit orders sit a geometric number of ticks behind the opposite
//!   best quote, which yields multi-level ladders with gaps.
//! * Individual marketable orders are priced at the opposite best quote.
//! * Institutional orders are priced `institution_reach_ticks` through the
//!   opposite best quote and walk the ladder.
//! * `sell_depth_ratio` scales the size of resting bids (the depth a seller
//!   hits) relative to resting asks. Individual marketable orders are scaled by
//!   the ratio of the side they hit, so only institutional orders see the
//!   asymmetry.
//! * Passive orders go preferentially to the side whose resting depth is
//!   below its target share, and marketable individual orders lean back
//!   towards the start price, so the book stays two-sided and the price
//!   does not wander off over a long stream.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::LimitOrderBook;
use crate::ingest::{summarize, Action, OrderEvent, StockSummary};
use crate::series::{DailyClose, TrendKind};
use crate::types::{HalfTicks, Sessions, Shares, Side, Ticks, TraderType, DEFAULT_LOT};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid flow config: {0}")]
    Config(String),
    #[error("cannot parse flow config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid segment spec: {0}")]
    Segments(String),
}

/// Parameters of one synthetic order-flow stream (or market of streams).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub seed: u64,
    /// Stock code of the first stock; further stocks count up from it.
    pub stock_code: String,
    pub n_stocks: usize,
    /// Continuous trading time covered, starting at the morning open.
    pub duration_ms: i64,
    /// Stop after this many events; 0 for no limit.
    pub max_events: usize,
    /// Submissions per second on each side.
    pub submit_rate: f64,
    /// Probability that an event is a cancellation when the book holds
    /// `target_live_orders` orders; it scales with the live count, so each
    /// resting order faces the same hazard.
    pub cancel_fraction: f64,
    pub target_live_orders: usize,
    /// Mean passive offset, in ticks, behind the opposite best quote.
    pub placement_spread: f64,
    pub size_min_lots: u64,
    pub size_max_lots: u64,
    /// Pareto shape of the lot-size distribution.
    pub size_shape: f64,
    /// Fraction of submissions made by institutions.
    pub institution_fraction: f64,
    pub institution_size_multiplier: f64,
    pub institution_reach_ticks: Ticks,
    /// Fraction of individual submissions that are marketable.
    pub marketable_fraction: f64,
    /// Pull of individual marketable orders back towards the start price: their
    /// buy probability is `0.5 + mean_reversion * ln(start / mid)`, clamped to
    /// [0.1, 0.9]. Passive orders favour the side that is thin relative to
    /// `sell_depth_ratio`; institutions pick sides with equal odds.
    pub mean_reversion: f64,
    /// Size of resting bids relative to resting asks.
    pub sell_depth_ratio: f64,
    pub start_price_ticks: Ticks,
    /// Passive orders per side placed at the open.
    pub opening_levels: usize,
    /// Float capitalisation of the first stock; stock `i` gets `(i + 1)` times it.
    pub float_cap_mcny: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            seed: 1,
            stock_code: "000001".to_string(),
            n_stocks: 1,
            duration_ms: Sessions::default().total_len(),
            max_events: 0,
            submit_rate: 1.0,
            cancel_fraction: 0.3,
            target_live_orders: 1000,
            placement_spread: 3.0,
            size_min_lots: 1,
            size_max_lots: 50,
            size_shape: 2.5,
            institution_fraction: 0.05,
            institution_size_multiplier: 8.0,
            institution_reach_ticks: 5,
            marketable_fraction: 0.3,
            mean_reversion: 2.0,
            sell_depth_ratio: 1.0,
            start_price_ticks: 2000,
            opening_levels: 10,
            float_cap_mcny: 500.0,
        }
    }
}

impl FlowConfig {
    /// Parse a flat `key = value` file; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let config: FlowConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: &str| Err(SynthError::Config(msg.to_string()));
        let fraction = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.submit_rate > 0.0 && self.submit_rate.is_finite()) {
            return fail("submit_rate must be positive");
        }
        if !(fraction(self.cancel_fraction) && self.cancel_fraction < 1.0) {
            return fail("cancel_fraction must lie in [0, 1)");
        }
        if !fraction(self.institution_fraction) || !fraction(self.marketable_fraction) {
            return fail("institution_fraction and marketable_fraction must lie in [0, 1]");
        }
        if !(self.institution_size_multiplier >= 1.0) {
            return fail("institution_size_multiplier must be at least 1");
        }
        if !(self.mean_reversion >= 0.0 && self.mean_reversion.is_finite()) {
            return fail("mean_reversion must be non-negative");
        }
        if !(self.sell_depth_ratio > 0.0 && self.sell_depth_ratio.is_finite()) {
            return fail("sell_depth_ratio must be positive");
        }
        if !(self.placement_spread >= 0.0) || !(self.size_shape > 0.0) {
            return fail("placement_spread must be non-negative and size_shape positive");
        }
        if self.size_min_lots == 0 || self.size_max_lots < self.size_min_lots {
            return fail("need 1 <= size_min_lots <= size_max_lots");
        }
        if self.duration_ms <= 0 || self.start_price_ticks <= 0 || self.institution_reach_ticks < 0 {
            return fail("duration_ms and start_price_ticks must be positive, reach non-negative");
        }
        if self.target_live_orders == 0 {
            return fail("target_live_orders must be at least 1");
        }
        if self.n_stocks == 0 {
            return fail("n_stocks must be at least 1");
        }
        if !(self.float_cap_mcny > 0.0) {
            return fail("float_cap_mcny must be positive");
        }
        Ok(())
    }

    /// Stock code of stock `index` in a market.
    pub fn stock_code_of(&self, index: usize) -> String {
        match self.stock_code.parse::<u64>() {
            Ok(base) => format!("{:0width$}", base + index as u64, width = self.stock_code.len()),
            Err(_) if index == 0 => self.stock_code.clone(),
            Err(_) => format!("{}{index}", self.stock_code),
        }
    }
}

/// Generation state for one stream.
struct FlowState<'a> {
    config: &'a FlowConfig,
    rng: ChaCha8Rng,
    book: LimitOrderBook,
    stock_code: String,
    /// Candidate ids for cancellation; filled orders are dropped lazily.
    cancelable: Vec<u64>,
    events: Vec<OrderEvent>,
    next_id: u64,
    last_mid: HalfTicks,
    lots: Pareto<f64>,
    offset: Option<Geometric>,
}

impl FlowState<'_> {
    fn lot_count(&mut self) -> f64 {
        let x: f64 = self.lots.sample(&mut self.rng);
        x.floor().min(self.config.size_max_lots as f64)
    }

    fn depth_factor(&self, side: Side) -> f64 {
        match side {
            Side::Buy => self.config.sell_depth_ratio,
            Side::Sell => 1.0,
        }
    }

    fn shares(&self, lots: f64, factor: f64) -> Shares {
        ((lots * factor * DEFAULT_LOT as f64).round() as Shares).max(1)
    }

    fn passive_offset(&mut self) -> Ticks {
        match self.offset {
            Some(g) => g.sample(&mut self.rng) as Ticks,
            None => 0,
        }
    }

    /// Limit price of a passive order: behind the opposite best quote, or
    /// behind the last known mid when that side is empty.
    fn passive_price(&mut self, side: Side) -> Ticks {
        let offset = self.passive_offset();
        let price = match (side, self.book.best(side.opposite())) {
            (Side::Buy, Some(ask)) => ask - 1 - offset,
            (Side::Sell, Some(bid)) => bid + 1 + offset,
            (Side::Buy, None) => (self.last_mid.0 - 1).div_euclid(2) - offset,
            (Side::Sell, None) => self.last_mid.0.div_euclid(2) + 1 + offset,
        };
        price.max(1)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, timestamp_ms: i64, trader_type: TraderType, side: Side, action: Action, price: Ticks, size: Shares, order_id: u64) {
        let trader_id = match trader_type {
            TraderType::Institution => format!("I{:02}", self.rng.random_range(0..20)),
            TraderType::Individual => format!("P{:04}", self.rng.random_range(0..2000)),
        };
        let ev = OrderEvent {
            stock_code: self.stock_code.clone(),
            seq: self.events.len() as u64 + 1,
            timestamp_ms,
            order_id,
            trader_id,
            trader_type,
            side,
            action,
            price,
            size,
        };
        self.book.apply_event(&ev).expect("generator only emits valid events");
        if let Some(mid) = self.book.quotes().mid {
            self.last_mid = mid;
        }
        if action == Action::Submit && self.book.is_live(order_id) {
            self.cancelable.push(order_id);
        }
        self.events.push(ev);
    }

    fn submit(&mut self, timestamp_ms: i64, trader_type: TraderType, side: Side, price: Ticks, size: Shares) {
        let id = self.next_id;
        self.next_id += 1;
        self.push(timestamp_ms, trader_type, side, Action::Submit, price, size, id);
    }

    fn submit_passive(&mut self, timestamp_ms: i64, side: Side) {
        let lots = self.lot_count();
        let size = self.shares(lots, self.depth_factor(side));
        let price = self.passive_price(side);
        self.submit(timestamp_ms, TraderType::Individual, side, price, size);
    }

    /// Cancel a uniformly chosen live order; false when none is live.
    fn cancel_random(&mut self, timestamp_ms: i64) -> bool {
        while !self.cancelable.is_empty() {
            let i = self.rng.random_range(0..self.cancelable.len());
            let id = self.cancelable.swap_remove(i);
            if let Some((side, _, order)) = self.book.resting(id) {
                let trader_type = order.trader_type;
                self.push(timestamp_ms, trader_type, side, Action::Cancel, 0, 0, id);
                return true;
            }
        }
        false
    }

    fn step(&mut self, timestamp_ms: i64) {
        let cfg = self.config;
        let live = self.book.live_count() as f64;
        let weight = cfg.cancel_fraction * live;
        let p_cancel = weight / (weight + (1.0 - cfg.cancel_fraction) * cfg.target_live_orders as f64);
        if self.rng.random_bool(p_cancel) && self.cancel_random(timestamp_ms) {
            return;
        }
        let institutional = self.rng.random_bool(cfg.institution_fraction);
        let marketable = !institutional && self.rng.random_bool(cfg.marketable_fraction);
        let p_buy = if institutional {
            0.5
        } else if marketable {
            let start = HalfTicks::from_ticks(cfg.start_price_ticks).0 as f64;
            (0.5 + cfg.mean_reversion * (start / self.last_mid.0 as f64).ln()).clamp(0.1, 0.9)
        } else {
            // Replenish whichever side is thin relative to the target ratio.
            let bids = self.book.total_volume(Side::Buy) as f64;
            let asks = self.book.total_volume(Side::Sell) as f64 * cfg.sell_depth_ratio;
            if bids + asks > 0.0 {
                (asks / (bids + asks)).clamp(0.1, 0.9)
            } else {
                0.5
            }
        };
        let side = if self.rng.random_bool(p_buy) { Side::Buy } else { Side::Sell };
        let opposite = self.book.best(side.opposite());
        if institutional {
            let lots = self.lot_count() * cfg.institution_size_multiplier;
            let size = self.shares(lots, 1.0);
            let price = match (side, opposite) {
                (Side::Buy, Some(ask)) => ask + cfg.institution_reach_ticks,
                (Side::Sell, Some(bid)) => (bid - cfg.institution_reach_ticks).max(1),
                (_, None) => self.passive_price(side),
            };
            self.submit(timestamp_ms, TraderType::Institution, side, price, size);
        } else if let (true, Some(best)) = (marketable, opposite) {
            let lots = self.lot_count();
            let size = self.shares(lots, self.depth_factor(side.opposite()));
            self.submit(timestamp_ms, TraderType::Individual, side, best, size);
        } else {
            self.submit_passive(timestamp_ms, side);
        }
    }
}

/// Generate one stream from stream `stream` of the configured seed.
fn gen_stream(config: &FlowConfig, stream: u64, stock_code: String) -> Vec<OrderEvent> {
    let sessions = Sessions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let p = 1.0 / (1.0 + config.placement_spread);
    let mut state = FlowState {
        config,
        rng,
        book: LimitOrderBook::new(),
        stock_code,
        cancelable: Vec::new(),
        events: Vec::new(),
        next_id: 1,
        last_mid: HalfTicks::from_ticks(config.start_price_ticks),
        lots: Pareto::new(config.size_min_lots as f64, config.size_shape).expect("validated size params"),
        offset: (p < 1.0).then(|| Geometric::new(p).expect("validated placement spread")),
    };

    let open = sessions.morning.0;
    for _ in 0..config.opening_levels {
        state.submit_passive(open, Side::Buy);
        state.submit_passive(open, Side::Sell);
    }

    // Event rate per ms: both sides' submissions plus cancellations at the
    // target book size.
    let rate = 2.0 * config.submit_rate / 1000.0 / (1.0 - config.cancel_fraction);
    let gaps = Exp::new(rate).expect("validated rate");
    let horizon = config.duration_ms.min(sessions.total_len());
    let mut elapsed = 0.0f64;
    loop {
        if config.max_events > 0 && state.events.len() >= config.max_events {
            break;
        }
        elapsed += gaps.sample(&mut state.rng);
        let offset = elapsed.floor() as i64;
        if offset > horizon {
            break;
        }
        let clock = sessions.clock_from_offset(offset).expect("offset within sessions");
        state.step(clock);
    }
    state.events
}

/// Generate the order stream of the first stock.
pub fn gen_flow(config: &FlowConfig) -> Result<Vec<OrderEvent>, SynthError> {
    config.validate()?;
    Ok(gen_stream(config, 0, config.stock_code_of(0)))
}

/// One generated stock of a synthetic market.
#[derive(Debug, Clone)]
pub struct SynthStock {
    pub summary: StockSummary,
    pub events: Vec<OrderEvent>,
}

/// Generate `n_stocks` independent streams in parallel. Results are ordered
/// by stock index, so the output does not depend on scheduling.
pub fn gen_market(config: &FlowConfig) -> Result<Vec<SynthStock>, SynthError> {
    config.validate()?;
    Ok((0..config.n_stocks)
        .into_par_iter()
        .map(|i| {
            let code = config.stock_code_of(i);
            let events = gen_stream(config, i as u64, code.clone());
            let summary = summarize(&code, config.float_cap_mcny * (i + 1) as f64, &events);
            SynthStock { summary, events }
        })
        .collect())
}

/// One planned trend of a constructed close series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub kind: TrendKind,
    pub n_days: usize,
    /// Log change over the segment; positive for drawups.
    pub magnitude: f64,
}

impl SegmentSpec {
    /// Parse a comma-separated plan such as `up:120:0.4,down:60:-0.3`.
    pub fn parse_list(text: &str) -> Result<Vec<SegmentSpec>, SynthError> {
        text.split(',')
            .map(|item| {
                let bad = || SynthError::Segments(format!("segment {item:?} is not kind:days:log_change"));
                let mut parts = item.trim().split(':');
                let kind = match parts.next() {
                    Some("up") | Some("drawup") => TrendKind::Drawup,
                    Some("down") | Some("drawdown") => TrendKind::Drawdown,
                    _ => return Err(bad()),
                };
                let n_days = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
                let magnitude = parts.next().and_then(|m| m.parse().ok()).ok_or_else(bad)?;
                if parts.next().is_some() {
                    return Err(bad());
                }
                Ok(SegmentSpec { kind, n_days, magnitude })
            })
            .collect()
    }
}

/// First close date of generated series.
pub fn series_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2003, 1, 2).expect("valid date")
}

fn next_weekday(date: NaiveDate) -> NaiveDate {
    let mut d = date + Duration::days(1);
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d += Duration::days(1);
    }
    d
}

/// Build a close series that moves linearly in log price through the given
/// segments, starting at 10 CNY on 2003-01-02 and stepping over weekdays.
/// With `noise > 0`, independent N(0, noise) perturbations are added to each
/// log close after the first.
pub fn gen_price_series(spec: &[SegmentSpec], noise: f64, seed: u64) -> Result<Vec<DailyClose>, SynthError> {
    let fail = |msg: String| Err(SynthError::Segments(msg));
    if spec.is_empty() {
        return fail("no segments".into());
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return fail(format!("noise {noise} must be finite and non-negative"));
    }
    for (i, s) in spec.iter().enumerate() {
        if s.n_days == 0 {
            return fail(format!("segment {i} has no days"));
        }
        let signed_ok = match s.kind {
            TrendKind::Drawup => s.magnitude > 0.0,
            TrendKind::Drawdown => s.magnitude < 0.0,
        };
        if !signed_ok || !s.magnitude.is_finite() {
            return fail(format!("segment {i} magnitude {} disagrees with {}", s.magnitude, s.kind));
        }
        if i > 0 && spec[i - 1].kind == s.kind {
            return fail(format!("segments {} and {i} are both {}", i - 1, s.kind));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("validated noise");
    let mut log_px = vec![10.0f64.ln()];
    for s in spec {
        let base = *log_px.last().expect("non-empty");
        let step = s.magnitude / s.n_days as f64;
        log_px.extend((1..=s.n_days).map(|d| base + step * d as f64));
    }
    let mut date = series_start_date();
    let mut out = Vec::with_capacity(log_px.len());
    for (i, x) in log_px.iter().enumerate() {
        let jitter = if i > 0 && noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        out.push(DailyClose::new(date, (x + jitter).exp()));
        date = next_weekday(date);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{validate_stream, write_order_events};
    use crate::series::{drawup_ratio, segment_trends, TrendParams};

    fn small() -> FlowConfig {
        FlowConfig { max_events: 3000, ..FlowConfig::default() }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = gen_flow(&small()).unwrap();
        let b = gen_flow(&small()).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_order_events(&mut x, &a).unwrap();
        write_order_events(&mut y, &b).unwrap();
        assert_eq!(x, y);
        let c = gen_flow(&FlowConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stream_is_valid_and_ordered() {
        let events = gen_flow(&small()).unwrap();
        assert_eq!(events.len(), 3000);
        let report = validate_stream(&events, &Sessions::default());
        assert_eq!(report.hard_count(), 0, "{:?}", report.findings.first());
        assert!(events.windows(2).all(|w| (w[0].timestamp_ms, w[0].seq) < (w[1].timestamp_ms, w[1].seq)));
        let ids: Vec<u64> = events.iter().filter(|e| e.is_submit()).map(|e| e.order_id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn no_institutions_when_fraction_zero() {
        let events = gen_flow(&FlowConfig { institution_fraction: 0.0, ..small() }).unwrap();
        assert!(events.iter().all(|e| e.trader_type == TraderType::Individual));
    }

    #[test]
    fn institution_share_is_binomial() {
        let cfg = FlowConfig { max_events: 20_000, institution_fraction: 0.1, ..FlowConfig::default() };
        let events = gen_flow(&cfg).unwrap();
        let open_batch = 2 * cfg.opening_levels;
        let submits: Vec<&OrderEvent> = events.iter().skip(open_batch).filter(|e| e.is_submit()).collect();
        let n = submits.len() as f64;
        let k = submits.iter().filter(|e| e.trader_type == TraderType::Institution).count() as f64;
        let sd = (n * 0.1 * 0.9).sqrt();
        assert!((k - 0.1 * n).abs() < 4.0 * sd, "{k} of {n}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(FlowConfig { submit_rate: 0.0, ..small() }.validate().is_err());
        assert!(FlowConfig { cancel_fraction: 1.0, ..small() }.validate().is_err());
        assert!(FlowConfig { institution_size_multiplier: 0.5, ..small() }.validate().is_err());
        assert!(FlowConfig::from_toml_str("seed = 4\nbogus = 1\n").is_err());
        let cfg = FlowConfig::from_toml_str("seed = 4\nsell_depth_ratio = 0.5\n").unwrap();
        assert_eq!((cfg.seed, cfg.sell_depth_ratio, cfg.n_stocks), (4, 0.5, 1));
    }

    #[test]
    fn market_codes_and_caps() {
        let cfg = FlowConfig { n_stocks: 3, max_events: 200, ..FlowConfig::default() };
        let market = gen_market(&cfg).unwrap();
        let codes: Vec<&str> = market.iter().map(|s| s.summary.stock_code.as_str()).collect();
        assert_eq!(codes, ["000001", "000002", "000003"]);
        assert_eq!(market[2].summary.float_cap_mcny, 1500.0);
        assert_eq!(market[0].events, gen_flow(&cfg).unwrap());
    }

    fn seg(kind: TrendKind, n_days: usize, magnitude: f64) -> SegmentSpec {
        SegmentSpec { kind, n_days, magnitude }
    }

    #[test]
    fn single_drawup_has_ratio_one() {
        let closes = gen_price_series(&[seg(TrendKind::Drawup, 240, 0.5)], 0.0, 1).unwrap();
        assert_eq!(closes.len(), 241);
        let segments = segment_trends(&closes, TrendParams::default()).unwrap();
        assert_eq!(drawup_ratio(&segments).unwrap(), 1.0);
    }

    #[test]
    fn two_segments_recovered() {
        let spec = [seg(TrendKind::Drawup, 10, 0.3), seg(TrendKind::Drawdown, 10, -0.3)];
        let closes = gen_price_series(&spec, 0.0, 1).unwrap();
        let segments = segment_trends(&closes, TrendParams::default()).unwrap();
        assert_eq!(segments.len(), 2);
        assert_eq!((segments[0].n_days, segments[1].n_days), (10, 10));
        assert!((segments[1].magnitude + 0.3).abs() < 1e-12);
    }

    #[test]
    fn noisy_series_keep_kinds() {
        let spec = [seg(TrendKind::Drawup, 30, 0.4), seg(TrendKind::Drawdown, 30, -0.4), seg(TrendKind::Drawup, 30, 0.4)];
        let a = gen_price_series(&spec, 0.002, 7).unwrap();
        let b = gen_price_series(&spec, 0.002, 8).unwrap();
        assert_ne!(a, b);
        for closes in [a, b] {
            let kinds: Vec<TrendKind> = segment_trends(&closes, TrendParams::default()).unwrap().iter().map(|s| s.kind).collect();
            assert_eq!(kinds, [TrendKind::Drawup, TrendKind::Drawdown, TrendKind::Drawup]);
        }
    }

    #[test]
    fn rejects_bad_segment_spec() {
        assert!(gen_price_series(&[seg(TrendKind::Drawup, 5, 0.1), seg(TrendKind::Drawup, 5, 0.1)], 0.0, 1).is_err());
        assert!(gen_price_series(&[seg(TrendKind::Drawdown, 5, 0.1)], 0.0, 1).is_err());
        assert!(gen_price_series(&[], 0.0, 1).is_err());
    }

    #[test]
    fn dates_skip_weekends() {
        let closes = gen_price_series(&[seg(TrendKind::Drawup, 10, 0.1)], 0.0, 1).unwrap();
        assert_eq!(closes[0].date, series_start_date());
        assert!(closes.iter().all(|c| !matches!(c.date.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn segment_list_parses() {
        let spec = SegmentSpec::parse_list("up:120:0.4, down:60:-0.3").unwrap();
        assert_eq!(spec, vec![seg(TrendKind::Drawup, 120, 0.4), seg(TrendKind::Drawdown, 60, -0.3)]);
        assert!(SegmentSpec::parse_list("up:120").is_err());
        assert!(SegmentSpec::parse_list("sideways:1:0.1").is_err());
    }
}
