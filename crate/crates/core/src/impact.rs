//! Price-impact measures over a replayed trade tape.
//!
//! * `price_impact`: signed log distance between an order's VWAP and its
//!   reference price.
//! * `trade_returns`: trade-by-trade log returns in event time.
//! * `prior_volatility`: mean absolute return over the minute before an anchor.
//! * `event_study`: returns and structure values binned around institutional
//!   transactions.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::Trade;
use crate::stats::{anova_oneway, mean, welch_t, AnovaResult, TTestResult};
use crate::types::{HalfTicks, Millis, Sessions, Shares, Side, Ticks};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImpactError {
    #[error("order has zero executed volume")]
    ZeroVolume,
    #[error("reference price must be positive")]
    NonPositiveReference,
    #[error("window {window_ms} ms is not a positive multiple of bin {bin_ms} ms")]
    BadBinning { window_ms: Millis, bin_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    /// VWAP of the component trades in half-ticks (not rounded).
    pub vwap_half: f64,
    pub pi: f64,
}

/// Price impact of an order filled by `fills` (price, size) against a
/// reference price: `ln VWAP - ln P_r` for buys, `ln P_r - ln VWAP` for sells.
pub fn price_impact(
    fills: impl IntoIterator<Item = (Ticks, Shares)>,
    reference: HalfTicks,
    side: Side,
) -> Result<Impact, ImpactError> {
    if reference.0 <= 0 {
        return Err(ImpactError::NonPositiveReference);
    }
    let (mut notional, mut volume) = (0i128, 0i128);
    for (p, v) in fills {
        notional += p as i128 * v as i128;
        volume += v as i128;
    }
    if volume == 0 {
        return Err(ImpactError::ZeroVolume);
    }
    // Both quantities in half-ticks * shares.
    let vwap_scaled = 2 * notional;
    let ref_scaled = volume * reference.0 as i128;
    let pi = match side {
        Side::Buy => ((vwap_scaled - ref_scaled) as f64 / ref_scaled as f64).ln_1p(),
        Side::Sell => ((ref_scaled - vwap_scaled) as f64 / vwap_scaled as f64).ln_1p(),
    };
    Ok(Impact { vwap_half: vwap_scaled as f64 / volume as f64, pi })
}

/// Log return of each trade against the previous one; the first has none.
pub fn trade_returns(tape: &[Trade]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(tape.len());
    for (i, t) in tape.iter().enumerate() {
        out.push(i.checked_sub(1).map(|j| {
            let prev = tape[j].price;
            ((t.price - prev) as f64 / prev as f64).ln_1p()
        }));
    }
    out
}

/// Mean |R| over trades stamped in `[anchor - window, anchor)`.
pub fn prior_volatility(
    tape: &[Trade],
    returns: &[Option<f64>],
    anchor_ms: Millis,
    window_ms: Millis,
) -> Option<f64> {
    let lo = tape.partition_point(|t| t.timestamp_ms < anchor_ms - window_ms);
    let hi = tape.partition_point(|t| t.timestamp_ms < anchor_ms);
    let abs: Vec<f64> = returns[lo..hi].iter().flatten().map(|r| r.abs()).collect();
    if abs.is_empty() {
        None
    } else {
        Some(mean(&abs))
    }
}

/// Key used to order transactions by size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VolumeKey {
    pub volume: Shares,
    pub anchor_ms: Millis,
    pub order_id: u64,
    pub stock_code: String,
}

/// Split indices into the lower and upper half by volume; with an odd count
/// the median goes to the upper half.
pub fn split_by_volume(keys: &[VolumeKey]) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let large = idx.split_off(keys.len() / 2);
    (idx, large)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subset {
    SmallV,
    LargeV,
    Total,
}

impl Subset {
    pub fn name(self) -> &'static str {
        match self {
            Subset::SmallV => "small_v",
            Subset::LargeV => "large_v",
            Subset::Total => "total",
        }
    }
}

/// Bin layout: `n` half-open bins before the anchor, the anchor singleton,
/// and `n` bins after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub window_ms: Millis,
    pub bin_ms: Millis,
}

impl Default for Binning {
    fn default() -> Self {
        Binning { window_ms: 60_000, bin_ms: 5_000 }
    }
}

impl Binning {
    pub fn new(window_ms: Millis, bin_ms: Millis) -> Result<Self, ImpactError> {
        if bin_ms <= 0 || window_ms <= 0 || window_ms % bin_ms != 0 {
            return Err(ImpactError::BadBinning { window_ms, bin_ms });
        }
        Ok(Binning { window_ms, bin_ms })
    }

    pub fn per_side(&self) -> usize {
        (self.window_ms / self.bin_ms) as usize
    }

    pub fn len(&self) -> usize {
        2 * self.per_side() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        self.per_side()
    }

    /// Bin of a surrounding trade at `dt` ms from the anchor. A trade stamped
    /// at the anchor time goes just after it when it follows the anchor on the
    /// tape, else just before.
    pub fn bin_of(&self, dt: Millis, after_anchor: bool) -> Option<usize> {
        let n = self.per_side() as i64;
        if dt < -self.window_ms || dt > self.window_ms {
            return None;
        }
        let b = if dt < 0 {
            n + dt.div_euclid(self.bin_ms)
        } else if dt > 0 {
            n + (dt + self.bin_ms - 1) / self.bin_ms
        } else if after_anchor {
            n + 1
        } else {
            n - 1
        };
        Some(b as usize)
    }

    /// Label in seconds, e.g. `[-60,-55)`, `0`, `(0,5]`.
    pub fn label(&self, bin: usize) -> String {
        let n = self.per_side() as i64;
        let b = bin as i64 - n;
        let s = |ms: i64| {
            if ms % 1000 == 0 {
                format!("{}", ms / 1000)
            } else {
                format!("{}", ms as f64 / 1000.0)
            }
        };
        match b.cmp(&0) {
            std::cmp::Ordering::Less => format!("[{},{})", s(b * self.bin_ms), s((b + 1) * self.bin_ms)),
            std::cmp::Ordering::Equal => "0".to_string(),
            std::cmp::Ordering::Greater => format!("({},{}]", s((b - 1) * self.bin_ms), s(b * self.bin_ms)),
        }
    }
}

/// One stock-day tape with each fill's structure value (CNY * shares),
/// `None` when the mid was undefined before the fill.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StockTape {
    pub stock_code: String,
    pub trades: Vec<Trade>,
    pub fill_c: Vec<Option<f64>>,
}

/// An institutional transaction as seen by the event study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAnchor {
    pub tape: usize,
    pub components: Range<usize>,
    pub side: Side,
    pub anchor_ms: Millis,
    pub c_before: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinSamples {
    pub r: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub mean_r: Option<f64>,
    pub mean_c: Option<f64>,
    pub count: usize,
    pub c_count: usize,
}

impl BinSamples {
    pub fn summary(&self) -> BinSummary {
        BinSummary {
            mean_r: (!self.r.is_empty()).then(|| mean(&self.r)),
            mean_c: (!self.c.is_empty()).then(|| mean(&self.c)),
            count: self.r.len(),
            c_count: self.c.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBin {
    pub label: String,
    pub purchases: BinSummary,
    pub sales: BinSummary,
    /// Welch t of purchase returns against sign-flipped sale returns; negative
    /// when sales move the price further.
    pub t: Option<TTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyTable {
    pub subset: Subset,
    pub binning: Binning,
    pub bins: Vec<EventBin>,
    pub anova_purchases: Option<AnovaResult>,
    pub anova_sales: Option<AnovaResult>,
    pub n_purchases: usize,
    pub n_sales: usize,
    /// Anchors whose window crosses a session boundary.
    pub truncated: usize,
}

/// Raw per-bin samples for each side; pooling is per trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSamples {
    pub purchases: Vec<BinSamples>,
    pub sales: Vec<BinSamples>,
    pub n_purchases: usize,
    pub n_sales: usize,
    pub truncated: usize,
}

impl EventSamples {
    fn new(n_bins: usize) -> Self {
        EventSamples {
            purchases: vec![BinSamples::default(); n_bins],
            sales: vec![BinSamples::default(); n_bins],
            n_purchases: 0,
            n_sales: 0,
            truncated: 0,
        }
    }
}

/// For one anchor, the bin of every tape trade within the window, as
/// (tape index, bin).
pub fn assign_bins(tape: &[Trade], anchor: &EventAnchor, binning: &Binning) -> Vec<(usize, usize)> {
    let lo = tape.partition_point(|t| t.timestamp_ms < anchor.anchor_ms - binning.window_ms);
    let hi = tape.partition_point(|t| t.timestamp_ms <= anchor.anchor_ms + binning.window_ms);
    (lo..hi)
        .filter_map(|i| {
            if anchor.components.contains(&i) {
                return Some((i, binning.center()));
            }
            let dt = tape[i].timestamp_ms - anchor.anchor_ms;
            binning.bin_of(dt, i >= anchor.components.end).map(|b| (i, b))
        })
        .collect()
}

/// Collect binned returns and structure values around each anchor.
pub fn collect_event_samples(
    tapes: &[StockTape],
    anchors: &[&EventAnchor],
    binning: &Binning,
    sessions: &Sessions,
) -> EventSamples {
    let mut out = EventSamples::new(binning.len());
    let returns: Vec<Vec<Option<f64>>> = tapes.iter().map(|t| trade_returns(&t.trades)).collect();
    for anchor in anchors {
        let tape = &tapes[anchor.tape];
        let rets = &returns[anchor.tape];
        let samples = match anchor.side {
            Side::Buy => {
                out.n_purchases += 1;
                &mut out.purchases
            }
            Side::Sell => {
                out.n_sales += 1;
                &mut out.sales
            }
        };
        let truncated = match sessions.session_of(anchor.anchor_ms) {
            Some((open, close)) => {
                anchor.anchor_ms - binning.window_ms < open || anchor.anchor_ms + binning.window_ms > close
            }
            None => true,
        };
        if truncated {
            out.truncated += 1;
        }
        for (i, bin) in assign_bins(&tape.trades, anchor, binning) {
            if let Some(r) = rets[i] {
                samples[bin].r.push(r);
            }
            if bin != binning.center() {
                if let Some(c) = tape.fill_c[i] {
                    samples[bin].c.push(c);
                }
            }
        }
        if let Some(c) = anchor.c_before {
            samples[binning.center()].c.push(c);
        }
    }
    out
}

/// Summarize collected samples into a table with per-bin t statistics and a
/// per-side ANOVA of C across non-empty bins.
pub fn summarize_event_samples(samples: &EventSamples, subset: Subset, binning: &Binning) -> EventStudyTable {
    let bins = (0..binning.len())
        .map(|b| {
            let p = &samples.purchases[b];
            let s = &samples.sales[b];
            let flipped: Vec<f64> = s.r.iter().map(|r| -r).collect();
            EventBin {
                label: binning.label(b),
                purchases: p.summary(),
                sales: s.summary(),
                t: welch_t(&p.r, &flipped).ok(),
            }
        })
        .collect();
    let anova = |side: &[BinSamples]| {
        let groups: Vec<&[f64]> = side.iter().map(|b| b.c.as_slice()).filter(|c| !c.is_empty()).collect();
        anova_oneway(&groups).ok()
    };
    EventStudyTable {
        subset,
        binning: *binning,
        bins,
        anova_purchases: anova(&samples.purchases),
        anova_sales: anova(&samples.sales),
        n_purchases: samples.n_purchases,
        n_sales: samples.n_sales,
        truncated: samples.truncated,
    }
}

pub fn event_study(
    tapes: &[StockTape],
    anchors: &[&EventAnchor],
    subset: Subset,
    binning: &Binning,
    sessions: &Sessions,
) -> EventStudyTable {
    summarize_event_samples(&collect_event_samples(tapes, anchors, binning, sessions), subset, binning)
}
